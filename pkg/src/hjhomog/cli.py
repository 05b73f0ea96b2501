"""Command-line front end.

Every subcommand writes CSV files with a header row into ``--out`` and a
``run.json`` manifest listing each file with its SHA-256 digest.  When a
manifest from an earlier run is present, the new hashes are compared with it
and the outcome is recorded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, cells
from .acceptance import SAMPLE_X1, AcceptanceRun, nonincreasing
from .config import load_config
from .controls import e0, hamiltonian
from .effective import EffectiveProblemSpec, compare_fields, solve_effective
from .engines.grid import _jsonable
from .errors import ConfigError, HJError
from .geometry import FingerGeometry, InterfaceSpec

MANIFEST = "run.json"


@contextmanager
def _mapper(jobs):
    if jobs <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield pool.map


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return Path(path)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Session:
    """Collects produced files, timings and diagnostics of one command."""

    def __init__(self, command, config):
        self.command = command
        self.config = config
        self.out = Path(config.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.timings = {}
        self.diagnostics = {}
        self.acceptance = None

    def path(self, name):
        return self.out / name

    def add(self, *paths):
        for p in paths:
            p = Path(p)
            self.files.append(p)
            sidecar = p.with_suffix(p.suffix + ".json")
            if sidecar.exists():
                self.files.append(sidecar)

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - start

    def write_manifest(self):
        manifest_path = self.path(MANIFEST)
        previous = {}
        if manifest_path.exists():
            try:
                old = json.loads(manifest_path.read_text())
                previous = {f["path"]: f["sha256"] for f in old.get("files", [])}
            except (json.JSONDecodeError, KeyError, TypeError):
                previous = {}
        files = [{"path": str(p.relative_to(self.out)), "sha256": _sha256(p)} for p in self.files]
        compared = [f for f in files if f["path"] in previous]
        changed = [f["path"] for f in compared if previous[f["path"]] != f["sha256"]]
        manifest = {
            "version": __version__,
            "command": self.command,
            "config": self.config.snapshot(),
            "timings": self.timings,
            "files": files,
            "rerun_check": {"compared": len(compared), "changed": changed, "identical": not changed},
            "diagnostics": self.diagnostics,
        }
        if self.acceptance is not None:
            manifest["acceptance"] = self.acceptance
        manifest_path.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True))
        return manifest


# subcommands ----------------------------------------------------------------

def cmd_hamiltonian_table(cfg, mapper, session):
    pair = cfg.pair
    with session.stage("effective_table"):
        table = cells.effective_table(pair, cfg.profile, cfg.cell_eta, cfg.table_p1, cfg.table_p2,
                                      cfg.hm_nodes, cfg.hm_schedule, mapper=mapper)
    rows = []
    for i, p1 in enumerate(cfg.table_p1):
        for j, p2 in enumerate(cfg.table_p2):
            p = np.array([p1, p2])
            rows.append([p1, p2, hamiltonian(pair.left, p), hamiltonian(pair.right, p), table.values[i, j]])
    session.add(_write_rows(session.path("hamiltonians.csv"), ["p1", "p2", "H_L", "H_R", "H_M"], rows))
    e0_rows = []
    for p2 in cfg.table_p2:
        left, right, mid = e0(pair.left, p2), e0(pair.right, p2), table.e0(p2)
        e0_rows.append([p2, left, right, mid, max(left, mid), max(mid, right), max(left, right)])
    session.add(_write_rows(session.path("e0.csv"), ["p2", "E0_L", "E0_R", "E0_M", "E0_LM", "E0_MR", "E0_LR"],
                            e0_rows))
    session.diagnostics["table_shape"] = [len(cfg.table_p1), len(cfg.table_p2)]
    return 0


def _safe_job(fn):
    def run(args):
        try:
            return fn(args)
        except HJError as exc:
            return f"{type(exc).__name__}: {exc}"
    return run


def _finger_safe(args):
    return _safe_job(_finger)(args)


def _finger(args):
    pair, fg, orientation, p2, rhos, tol, kw = args
    return cells.flux_limiter(pair, fg, orientation, p2, rhos, tol, **kw)


def _eps_safe(args):
    return _safe_job(_eps)(args)


def _eps(args):
    pair, spec, p2, rhos, tol, kw = args
    return cells.epsilon_flux_limiter(pair, spec, p2, rhos, tol, **kw)


def _curve(kind, p2s, results, errors):
    vals, incs, conv = [], [], []
    for p2, res in zip(p2s, results):
        if isinstance(res, str):
            errors.append({"curve": kind, "p2": p2, "error": res})
            vals.append(math.nan)
            incs.append(math.nan)
            conv.append(False)
        else:
            vals.append(res.value)
            incs.append(res.increments[-1])
            conv.append(res.converged)
    rhos = next((list(r.rhos) for r in results if not isinstance(r, str)), [])
    return cells.FluxLimiterCurve(kind, list(p2s), vals, rhos, incs, conv)


def cmd_flux_limiters(cfg, mapper, session):
    pair = cfg.pair
    p2s = list(cfg.p2_samples)
    fg = FingerGeometry(cfg.profile, cfg.cell_eta)
    kw = {"h1": cfg.finger_h1, "n2": cfg.finger_n2, "schedule": cfg.discount_schedule}
    errors = []
    with session.stage("effective_table"):
        table = cells.effective_table(pair, cfg.profile, cfg.cell_eta, cfg.table_p1, p2s, cfg.hm_nodes,
                                      cfg.hm_schedule, mapper=mapper)
    curves = {
        "E0_L": cells.FluxLimiterCurve.from_function("E0_L", p2s, lambda p: e0(pair.left, p)),
        "E0_R": cells.FluxLimiterCurve.from_function("E0_R", p2s, lambda p: e0(pair.right, p)),
        "E0_M": cells.FluxLimiterCurve.from_function("E0_M", p2s, table.e0),
    }
    curves["E0_LM"] = cells.FluxLimiterCurve.from_function(
        "E0_LM", p2s, lambda p: max(curves["E0_L"](p), curves["E0_M"](p)))
    curves["E0_MR"] = cells.FluxLimiterCurve.from_function(
        "E0_MR", p2s, lambda p: max(curves["E0_M"](p), curves["E0_R"](p)))
    for orientation in ("LM", "MR"):
        with session.stage(f"E_{orientation}"):
            jobs = [(pair, fg, orientation, p2, cfg.finger_rhos, cfg.limiter_tol, kw) for p2 in p2s]
            curves[f"E_{orientation}"] = _curve(f"E_{orientation}", p2s, list(mapper(_finger_safe, jobs)), errors)
    with session.stage("E_limit"):
        results = []
        for p2 in p2s:
            lims = (curves["E_LM"](p2), curves["E_MR"](p2))
            try:
                if not all(np.isfinite(lims)):
                    raise HJError("a finger limiter is missing at this sample")
                results.append(cells.flux_limiter_1d(pair, table, lims, p2, cfg.line_rhos, cfg.limiter_tol,
                                                     cfg.line_h, cfg.discount_schedule))
            except HJError as exc:
                results.append(f"{type(exc).__name__}: {exc}")
        curves["E_limit"] = _curve("E_limit", p2s, results, errors)
    for eps in cfg.eps_list:
        kind = f"E_eps({eps:g})"
        with session.stage(kind):
            spec = InterfaceSpec(cfg.profile, 1.0, eps)
            eps_kw = {"schedule": cfg.discount_schedule, "nodes_per_eps": cfg.eps_nodes}
            jobs = [(pair, spec, p2, cfg.finger_rhos, cfg.limiter_tol, eps_kw) for p2 in p2s]
            curves[kind] = _curve(kind, p2s, list(mapper(_eps_safe, jobs)), errors)
    for kind, curve in curves.items():
        session.add(curve.write_csv(session.path(f"limiter_{kind}.csv")))
    names = list(curves)
    rows = []
    for p2 in p2s:
        vals = [curves[k](p2) for k in names]
        check = max(curves["E_LM"](p2), curves["E_MR"](p2)) - curves["E_limit"](p2)
        rows.append([p2, *vals, check])
    session.add(_write_rows(session.path("flux_limiters.csv"), ["p2", *names, "check"], rows))
    not_converged = []
    for kind, curve in curves.items():
        not_converged.extend({"curve": kind, "p2": p} for p, ok in zip(curve.p2, curve.converged) if not ok)
    session.diagnostics.update(errors=errors, not_converged=not_converged)
    return 0


def _limiters_at_zero(cfg, mapper):
    fg = FingerGeometry(cfg.profile, cfg.cell_eta)
    kw = {"h1": cfg.finger_h1, "n2": cfg.finger_n2, "schedule": cfg.discount_schedule}
    jobs = [(cfg.pair, fg, o, 0.0, cfg.finger_rhos, cfg.limiter_tol, kw) for o in ("LM", "MR")]
    lm, mr = mapper(_finger, jobs)
    return lm, mr


def _effective_spec(cfg, kind, eta=None, eps=None, limiters=None, hm=None):
    return EffectiveProblemSpec(kind, cfg.pair, cfg.discount, eta=eta, eps=eps, profile=cfg.profile, hm=hm,
                                limiters=limiters or {}, window=tuple(cfg.window), h=cfg.h,
                                cells_per_period=cfg.cells_per_period)


def cmd_solve(cfg, mapper, session, kind, eta=None, eps=None):
    eta = cfg.eta_list[0] if eta is None else eta
    eps = cfg.eps_list[0] if eps is None else eps
    limiters, hm = {}, None
    if kind in ("eta", "flat"):
        with session.stage("limiters"):
            lm, mr = _limiters_at_zero(cfg, mapper)
        session.diagnostics["limiters"] = {"E_LM(0)": lm.value, "E_MR(0)": mr.value,
                                           "converged": [lm.converged, mr.converged]}
        if kind == "flat":
            limiters = {"E": max(lm.value, mr.value)}
        else:
            limiters = {"LM": lm.value, "MR": mr.value}
            with session.stage("effective_table"):
                hm = cells.effective_table(cfg.pair, cfg.profile, cfg.cell_eta, cfg.table_p1, [0.0],
                                           cfg.hm_nodes, cfg.hm_schedule, mapper=mapper)
    spec = _effective_spec(cfg, kind, eta=eta if kind != "flat" else None,
                           eps=eps if kind == "direct" else None, limiters=limiters, hm=hm)
    with session.stage(f"solve_{kind}"):
        fld = solve_effective(spec)
    session.add(fld.write_csv(session.path(f"solve_{kind}.csv")))
    session.diagnostics.update(sup=fld.sup, lipschitz=fld.lipschitz(), residual=fld.meta.get("residual"))
    return 0


def cmd_converge(cfg, mapper, session):
    with session.stage("limiters"):
        lm, mr = _limiters_at_zero(cfg, mapper)
    with session.stage("effective_table"):
        hm = cells.effective_table(cfg.pair, cfg.profile, cfg.cell_eta, cfg.table_p1, [0.0], cfg.hm_nodes,
                                   cfg.hm_schedule, mapper=mapper)
    ref_limiter = max(lm.value, mr.value)
    flat = solve_effective(_effective_spec(cfg, "flat", limiters={"E": ref_limiter}))
    lo, hi = cfg.window
    pts = [(x, 0.0) for x in SAMPLE_X1 if lo <= x <= hi]
    eta_fixed = max(cfg.eta_list)
    studies = {
        "direct_vs_flat": [(eps, lambda eps=eps: _effective_spec(cfg, "direct", eta=eps, eps=eps), flat)
                           for eps in cfg.eps_list],
        "eta_vs_flat": [(eta, lambda eta=eta: _effective_spec(cfg, "eta", eta=eta, hm=hm,
                                                              limiters={"LM": lm.value, "MR": mr.value}), flat)
                        for eta in cfg.eta_list],
    }
    eta_ref = solve_effective(_effective_spec(cfg, "eta", eta=eta_fixed, hm=hm,
                                              limiters={"LM": lm.value, "MR": mr.value}))
    studies["direct_vs_eta"] = [(eps, lambda eps=eps: _effective_spec(cfg, "direct", eta=eta_fixed, eps=eps),
                                 eta_ref) for eps in cfg.eps_list]
    rows, failures, summary = [], [], {}
    for study, entries in studies.items():
        errs = []
        with session.stage(study):
            for scale, make, ref in entries:
                try:
                    rep = compare_fields(solve_effective(make()), ref, pts)
                    rows.append([study, scale, rep.max_error, rep.mean_error, ""])
                    errs.append(rep.max_error)
                except HJError as exc:
                    failures.append({"study": study, "scale": scale, "error": str(exc)})
                    rows.append([study, scale, math.nan, math.nan, f"{type(exc).__name__}: {exc}"])
        summary[study] = errs
    with session.stage("E_eps_vs_max"):
        eps_kw = {"schedule": cfg.discount_schedule, "nodes_per_eps": cfg.eps_nodes}
        jobs = [(cfg.pair, InterfaceSpec(cfg.profile, 1.0, eps), 0.0, cfg.finger_rhos, cfg.limiter_tol, eps_kw)
                for eps in cfg.eps_list]
        errs = []
        for eps, res in zip(cfg.eps_list, mapper(_eps_safe, jobs)):
            if isinstance(res, str):
                failures.append({"study": "E_eps_vs_max", "scale": eps, "error": res})
                rows.append(["E_eps_vs_max", eps, math.nan, math.nan, res])
            else:
                err = abs(res.value - ref_limiter)
                errs.append(err)
                rows.append(["E_eps_vs_max", eps, err, err, ""])
        summary["E_eps_vs_max"] = errs
    session.add(_write_rows(session.path("converge.csv"), ["study", "scale", "max_error", "mean_error", "error"],
                            rows))
    verdicts = {k: (nonincreasing(v) if len(v) >= 2 else None) for k, v in summary.items()}
    session.diagnostics.update(errors=summary, verdict=verdicts, failures=failures,
                               limiters={"E_LM(0)": lm.value, "E_MR(0)": mr.value})
    return 0


def cmd_acceptance(cfg, mapper, session, numbers=None):
    run = AcceptanceRun(cfg, mapper)
    results = []
    for n in numbers or range(1, 11):
        res = run.run_one(n)
        results.append(res)
        print(res.line(), flush=True)
        session.timings[f"criterion_{n}"] = res.seconds
    rows = [[r.number, r.title, r.passed, r.summary, r.seconds] for r in results]
    session.add(_write_rows(session.path("acceptance.csv"), ["criterion", "title", "passed", "summary", "seconds"],
                            rows))
    session.acceptance = {str(r.number): {"passed": r.passed, "summary": r.summary, "details": r.details}
                          for r in results}
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed", flush=True)
    return 1 if failed else 0


# argument parsing -----------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="INI config file (default: shipped config)")
    common.add_argument("--out", type=Path, default=None, help="output directory (overrides output.dir)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for independent solves")
    common.add_argument("--tol", type=float, default=None, help="truncation/extrapolation convergence tolerance")
    parser = argparse.ArgumentParser(prog="hjhomog", description="Oscillating-interface Hamilton-Jacobi toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("hamiltonian-table", parents=[common], help="tabulate H_L, H_R, H_M and E0 curves")
    sub.add_parser("flux-limiters", parents=[common], help="tabulate every flux limiter over p2")
    solve = sub.add_parser("solve", parents=[common], help="solve one effective or direct problem")
    solve.add_argument("--kind", choices=("direct", "eta", "flat"), required=True)
    solve.add_argument("--eta", type=float, default=None)
    solve.add_argument("--eps", type=float, default=None)
    sub.add_parser("converge", parents=[common], help="convergence sweeps over eta and eps")
    acc = sub.add_parser("acceptance", parents=[common], help="run the acceptance criteria")
    acc.add_argument("--only", type=int, nargs="+", choices=range(1, 11), default=None,
                     help="run a subset of the criteria")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config).with_overrides(out_dir=args.out, tol=args.tol)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if args.command == "acceptance":
            print("[FAIL] acceptance not run: configuration rejected", flush=True)
        return 2
    session = Session(args.command, cfg)
    try:
        with _mapper(args.jobs) as mapper:
            if args.command == "hamiltonian-table":
                code = cmd_hamiltonian_table(cfg, mapper, session)
            elif args.command == "flux-limiters":
                code = cmd_flux_limiters(cfg, mapper, session)
            elif args.command == "solve":
                code = cmd_solve(cfg, mapper, session, args.kind, args.eta, args.eps)
            elif args.command == "converge":
                code = cmd_converge(cfg, mapper, session)
            else:
                code = cmd_acceptance(cfg, mapper, session, args.only)
    except HJError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        session.diagnostics["fatal"] = f"{type(exc).__name__}: {exc}"
        code = 1
    session.write_manifest()
    return code


if __name__ == "__main__":
    sys.exit(main())
