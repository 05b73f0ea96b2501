"""Acceptance suite shared by the command line and the tests.

Each criterion is a method of :class:`AcceptanceRun` returning a
:class:`CriterionResult`.  Expensive intermediate objects (limiter sweeps,
Hamiltonian tables, value fields) are cached on the run so that criteria
that share them do not recompute.
"""

from __future__ import annotations

import hashlib
import tempfile
import time
import traceback
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import cells
from .controls import check_assumptions, e0, hamiltonian
from .effective import EffectiveProblemSpec, compare_fields, solve_effective
from .engines.grid import Grid
from .engines.junction1d import Junction, Piece, build_junction_model, junction_solve_1d
from .engines.semilagrangian import DPProblem, build_sl_model, value_iteration
from .errors import HJError
from .geometry import FingerGeometry, InterfaceSpec
from .instances import identical_pair

# thresholds of the criteria
MAX_IDENTITY_TOL = 0.05
LOWER_BOUND_TOL = 0.02
RHO_MONOTONE_TOL = 0.01
CONVEXITY_TOL = 1e-6
DEGENERACY_TOL = 1e-3
ORACLE_TOL = 1e-2
SANDWICH_TOL = 0.05
SANDWICH_RATE = 0.01
NULL_LIMITER_TOL = 0.02
NULL_DIRECT_TOL = 0.02
NULL_FLAT_TOL = 1e-6
BOUND_SLACK = 1e-9
LIPSCHITZ_SPREAD = 0.2
ENGINE_TOL = 1e-9
# errors of the convergence sweeps may stall at solver round-off
SWEEP_SLACK = 1e-6

STRUCTURE_AXIS = tuple(np.linspace(-2.0, 2.0, 21))
ORACLE_MOMENTA = ((0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0),
                  (1.0, 1.0), (-1.5, 0.5), (2.0, 0.5), (0.5, -2.0))
SAMPLE_X1 = (-3.0, -2.0, -1.5, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0)
RANDOM_PAIRS = 100
TITLES = {
    1: "max identity E = max(E_LM, E_MR)",
    2: "lower-bound chain",
    3: "monotonicity along truncation schedules",
    4: "structure of the effective Hamiltonian",
    5: "ergodic solver against the branch-selection oracle",
    6: "corrector slope sandwich",
    7: "identical-media null tests",
    8: "convergence sweeps",
    9: "uniform bounds",
    10: "engine properties",
}


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.number:2d}: {self.title} -- {self.summary} ({self.seconds:.1f}s)"


def _finger_job(args):
    pair, fg, orientation, p2, rhos, tol, kw = args
    return cells.flux_limiter(pair, fg, orientation, p2, rhos, tol, **kw)


def _eps_job(args):
    pair, spec, p2, rhos, tol, kw = args
    return cells.epsilon_flux_limiter(pair, spec, p2, rhos, tol, **kw)


def _hm_grid_job(args):
    return cells.effective_hm(*args)


def _monotone_defect(values):
    d = np.diff(np.asarray(values, dtype=float))
    return float(max(0.0, -d.min())) if d.size else 0.0


def nonincreasing(errors, slack=SWEEP_SLACK):
    return all(b <= a + slack for a, b in zip(errors, errors[1:]))


class AcceptanceRun:
    """All ten acceptance criteria for one :class:`~hjhomog.config.RunConfig`.

    ``mapper`` runs independent solves (a ``map``-compatible callable, e.g.
    ``ProcessPoolExecutor.map``).
    """

    def __init__(self, config, mapper=map):
        self.config = config
        self.mapper = mapper
        self.fields = {}

    # shared objects -----------------------------------------------------

    @property
    def pair(self):
        return self.config.pair

    @cached_property
    def finger(self):
        return FingerGeometry(self.config.profile, self.config.cell_eta)

    @property
    def finger_kw(self):
        c = self.config
        return {"h1": c.finger_h1, "n2": c.finger_n2, "schedule": c.discount_schedule}

    @cached_property
    def table(self):
        """Effective Hamiltonian of the configured pair on the ``p1`` axis times the ``p2`` samples."""
        c = self.config
        return cells.effective_table(self.pair, c.profile, c.cell_eta, c.table_p1, c.p2_samples,
                                     c.hm_nodes, c.hm_schedule, mapper=self.mapper)

    def _limiters(self, pair, orientation):
        c = self.config
        jobs = [(pair, self.finger, orientation, p2, c.finger_rhos, c.limiter_tol, self.finger_kw)
                for p2 in c.p2_samples]
        return list(self.mapper(_finger_job, jobs))

    @cached_property
    def limiters_mr(self):
        return self._limiters(self.pair, "MR")

    @cached_property
    def limiters_lm(self):
        return self._limiters(self.pair, "LM")

    @cached_property
    def limiters_1d(self):
        c = self.config
        out = []
        for p2, lm, mr in zip(c.p2_samples, self.limiters_lm, self.limiters_mr):
            out.append(cells.flux_limiter_1d(self.pair, self.table, (lm.value, mr.value), p2, c.line_rhos,
                                             c.limiter_tol, c.line_h, c.discount_schedule))
        return out

    @cached_property
    def eps_limiters(self):
        """``E_eps(0)`` for every ``eps`` of the sweep."""
        c = self.config
        jobs = [(self.pair, InterfaceSpec(c.profile, 1.0, eps), 0.0, c.finger_rhos, c.limiter_tol,
                 {"schedule": c.discount_schedule, "nodes_per_eps": c.eps_nodes}) for eps in c.eps_list]
        return list(self.mapper(_eps_job, jobs))

    def curve(self, kind):
        c = self.config
        if kind == "E_MR":
            return cells.FluxLimiterCurve.from_estimates(kind, c.p2_samples, self.limiters_mr)
        if kind == "E_LM":
            return cells.FluxLimiterCurve.from_estimates(kind, c.p2_samples, self.limiters_lm)
        if kind == "E_limit":
            return cells.FluxLimiterCurve.from_estimates(kind, c.p2_samples, self.limiters_1d)
        raise KeyError(kind)

    def _problem(self, kind, **kw):
        c = self.config
        base = dict(pair=self.pair, discount=c.discount, window=tuple(c.window), h=c.h,
                    cells_per_period=c.cells_per_period)
        base.update(kw)
        return EffectiveProblemSpec(kind, **base)

    @cached_property
    def flat_limiter(self):
        i = self.config.p2_samples.index(0.0)
        return max(self.limiters_lm[i].value, self.limiters_mr[i].value)

    def flat_field(self):
        if "flat" not in self.fields:
            self.fields["flat"] = solve_effective(self._problem("flat", limiters={"E": self.flat_limiter}))
        return self.fields["flat"]

    def eta_field(self, eta):
        key = ("eta", eta)
        if key not in self.fields:
            i = self.config.p2_samples.index(0.0)
            lim = {"LM": self.limiters_lm[i].value, "MR": self.limiters_mr[i].value}
            self.fields[key] = solve_effective(self._problem("eta", eta=eta, hm=self.table, limiters=lim))
        return self.fields[key]

    def direct_field(self, eps):
        key = ("direct", eps)
        if key not in self.fields:
            spec = self._problem("direct", eta=eps, eps=eps, profile=self.config.profile)
            self.fields[key] = solve_effective(spec)
        return self.fields[key]

    @property
    def sample_points(self):
        lo, hi = self.config.window
        return [(x, 0.0) for x in SAMPLE_X1 if lo <= x <= hi]

    # criteria -----------------------------------------------------------

    def criterion_1(self):
        rows, worst = [], 0.0
        for p2, lm, mr, full in zip(self.config.p2_samples, self.limiters_lm, self.limiters_mr, self.limiters_1d):
            gap = abs(full.value - max(lm.value, mr.value))
            worst = max(worst, gap)
            rows.append({"p2": p2, "E_LM": lm.value, "E_MR": mr.value, "E": full.value, "gap": gap,
                         "converged": [lm.converged, mr.converged, full.converged]})
        passed = worst <= MAX_IDENTITY_TOL
        return passed, f"max |E - max(E_LM, E_MR)| = {worst:.3g} (tol {MAX_IDENTITY_TOL})", {"rows": rows}

    def criterion_2(self):
        rows, worst = [], np.inf
        for p2, lm, mr, full in zip(self.config.p2_samples, self.limiters_lm, self.limiters_mr, self.limiters_1d):
            e0_m = self.table.e0(p2)
            e0_l, e0_r = e0(self.pair.left, p2), e0(self.pair.right, p2)
            margins = {"E_MR - E0_MR": mr.value - max(e0_m, e0_r),
                       "E_LM - E0_LM": lm.value - max(e0_l, e0_m),
                       "E - max(E0_L, E0_R)": full.value - max(e0_l, e0_r)}
            worst = min(worst, min(margins.values()))
            rows.append({"p2": p2, **margins})
        passed = worst >= -LOWER_BOUND_TOL
        return passed, f"smallest margin {worst:.3g} (must be >= -{LOWER_BOUND_TOL})", {"rows": rows}

    def criterion_3(self):
        defects = {}
        for p2, lm, mr, full in zip(self.config.p2_samples, self.limiters_lm, self.limiters_mr, self.limiters_1d):
            defects[f"lambda_rho MR p2={p2:g}"] = _monotone_defect(mr.levels)
            defects[f"lambda_rho LM p2={p2:g}"] = _monotone_defect(lm.levels)
            defects[f"mu_rho p2={p2:g}"] = _monotone_defect(full.levels)
        for eps, est in zip(self.config.eps_list, self.eps_limiters):
            defects[f"E_eps_rho eps={eps:g}"] = _monotone_defect(est.levels)
        worst = max(defects.values())
        passed = worst <= RHO_MONOTONE_TOL
        return passed, f"largest decrease {worst:.3g} (tol {RHO_MONOTONE_TOL})", {"defects": defects}

    def criterion_4(self):
        c = self.config
        axis = np.asarray(STRUCTURE_AXIS)
        details = {}
        ok = True
        for name, pair in (("configured", self.pair), ("identical", identical_pair())):
            tab = cells.effective_table(pair, c.profile, c.cell_eta, axis, axis, c.hm_nodes, c.hm_schedule,
                                        mapper=self.mapper)
            conv = cells.convexity_violation(tab)
            report = check_assumptions(pair, raise_on_failure=False)
            big_c = pair.cost_bound + 1.0
            p1, p2 = np.meshgrid(axis, axis, indexing="ij")
            norm = np.hypot(p1, p2)
            lower_def = float(np.max(report.delta0 * norm - big_c - tab.values))
            upper_def = float(np.max(tab.values - big_c * norm - big_c))
            entry = {"convexity_violation": conv, "delta0": report.delta0, "C": big_c,
                     "lower_bound_defect": lower_def, "upper_bound_defect": upper_def}
            ok &= conv <= CONVEXITY_TOL and lower_def <= 0 and upper_def <= 0
            if name == "identical":
                exact = hamiltonian(pair.right, np.stack([p1.ravel(), p2.ravel()], axis=1)).reshape(p1.shape)
                entry["degeneracy_error"] = float(np.max(np.abs(tab.values - exact)))
                ok &= entry["degeneracy_error"] <= DEGENERACY_TOL
            details[name] = entry
        summary = (f"convexity {details['configured']['convexity_violation']:.2g}, "
                   f"degeneracy {details['identical']['degeneracy_error']:.2g}")
        return ok, summary, details

    def criterion_5(self):
        c = self.config
        rows, worst = [], 0.0
        for name, pair in (("configured", self.pair), ("identical", identical_pair())):
            jobs = [(pair, c.profile, c.cell_eta, p, c.hm_nodes, c.hm_schedule) for p in ORACLE_MOMENTA]
            solved = list(self.mapper(_hm_grid_job, jobs))
            for p, val in zip(ORACLE_MOMENTA, solved):
                ref = cells.hm_oracle(pair, c.profile, p)
                worst = max(worst, abs(val - ref))
                rows.append({"instance": name, "p": list(p), "solver": val, "oracle": ref})
        passed = worst <= ORACLE_TOL
        return passed, f"max |solver - oracle| = {worst:.3g} (tol {ORACLE_TOL})", {"rows": rows}

    def criterion_6(self):
        c = self.config
        rows, ok = [], True
        rho = c.corrector_finger_rho
        for orientation in ("MR", "LM"):
            pair = self.pair if orientation == "MR" else self.pair.mirrored()
            mid = self.table if orientation == "MR" else self.table.mirrored()
            for p2 in c.p2_samples:
                res = cells.lambda_rho(self.pair, self.finger, p2, rho, orientation, c.finger_h1, c.finger_n2,
                                       c.discount_schedule)
                left = cells.slope_thresholds(mid, p2, res.constant, "minus", "M")
                right = cells.slope_thresholds(pair.right, p2, res.constant, "plus", "R")
                prof = cells.CorrectorProfile(res.corrector, 1.0 / rho, (0.0, 0.0))
                rep = cells.corrector_slope_check(prof, left, right, SANDWICH_TOL, SANDWICH_RATE)
                ok &= rep.passed
                rows.append(self._slope_row(f"finger {orientation}", p2, res.constant, left, right, rep))
        spec = InterfaceSpec(c.profile, 1.0, c.corrector_eps)
        rho = c.corrector_eps_rho
        for p2 in c.p2_samples:
            res = cells.epsilon_level(self.pair, spec, p2, rho, c.eps_nodes, schedule=c.discount_schedule)
            left = cells.slope_thresholds(self.pair.left, p2, res.constant, "minus", "L")
            right = cells.slope_thresholds(self.pair.right, p2, res.constant, "plus", "R")
            prof = cells.CorrectorProfile(res.corrector, 1.0 / rho, (0.0, 0.0))
            rep = cells.corrector_slope_check(prof, left, right, SANDWICH_TOL, SANDWICH_RATE)
            ok &= rep.passed
            rows.append(self._slope_row(f"eps={c.corrector_eps:g}", p2, res.constant, left, right, rep))
        worst_rate = max(r["violation_rate"] for r in rows)
        worst_excess = max(r["worst_excess"] for r in rows)
        return ok, f"worst violation rate {worst_rate:.3g}, worst excess {worst_excess:.3g}", {"rows": rows}

    @staticmethod
    def _slope_row(problem, p2, level, left, right, rep):
        return {"problem": problem, "p2": p2, "level": level, "left": [left.lo, left.hi],
                "right": [right.lo, right.hi], "violation_rate": rep.violation_rate,
                "worst_excess": rep.worst_sandwich_excess, "growth": rep.growth, "passed": rep.passed}

    def criterion_7(self):
        c = self.config
        pair = identical_pair()
        jobs = [(pair, self.finger, "MR", p2, c.finger_rhos, c.limiter_tol, self.finger_kw) for p2 in c.p2_samples]
        ests = list(self.mapper(_finger_job, jobs))
        limiter_err = max(abs(est.value - e0(pair.right, p2)) for p2, est in zip(c.p2_samples, ests))
        direct = solve_effective(EffectiveProblemSpec("direct", pair, c.discount, eta=0.2, eps=0.2,
                                                      profile=c.profile, window=tuple(c.window), h=c.h,
                                                      cells_per_period=c.cells_per_period))
        flat = solve_effective(EffectiveProblemSpec("flat", pair, c.discount, limiters={"E": e0(pair.right, 0.0)},
                                                    window=tuple(c.window), h=c.h))
        self.fields["null direct"] = direct
        self.fields["null flat"] = flat
        target = 1.0 / c.discount
        direct_err = float(np.max(np.abs(direct.values - target)))
        flat_err = float(np.max(np.abs(flat.values - target)))
        passed = limiter_err <= NULL_LIMITER_TOL and direct_err <= NULL_DIRECT_TOL and flat_err <= NULL_FLAT_TOL
        details = {"limiter_error": limiter_err, "direct_error": direct_err, "flat_error": flat_err,
                   "limiters": [est.value for est in ests]}
        return passed, f"limiter {limiter_err:.2g}, direct {direct_err:.2g}, flat {flat_err:.2g}", details

    def criterion_8(self):
        c = self.config
        flat = self.flat_field()
        pts = self.sample_points
        direct_err = [compare_fields(self.direct_field(eps), flat, pts).max_error for eps in c.eps_list]
        eta_err = [compare_fields(self.eta_field(eta), flat, pts).max_error for eta in c.eta_list]
        ref = self.flat_limiter
        eps_err = [abs(est.value - ref) for est in self.eps_limiters]
        studies = {"direct_vs_flat": direct_err, "eta_vs_flat": eta_err, "E_eps_vs_max": eps_err}
        verdicts = {k: nonincreasing(v) for k, v in studies.items()}
        details = {"scales": {"eps": list(c.eps_list), "eta": list(c.eta_list)}, "errors": studies,
                   "nonincreasing": verdicts, "slack": SWEEP_SLACK}
        worst = max(max(v) for v in studies.values())
        return all(verdicts.values()), f"errors nonincreasing: {verdicts}; largest error {worst:.3g}", details

    def criterion_9(self):
        c = self.config
        if not any(isinstance(k, tuple) and k[0] == "direct" for k in self.fields):
            self.criterion_8()
        bound = (self.pair.cost_bound + self.pair.far_field_bound) / c.discount + BOUND_SLACK
        sups = {str(k): fld.sup for k, fld in self.fields.items()}
        lips = [self.fields[("direct", eps)].lipschitz() for eps in c.eps_list]
        spread = (max(lips) - min(lips)) / max(max(lips), 1e-300)
        passed = max(sups.values()) <= bound and spread < LIPSCHITZ_SPREAD
        details = {"bound": bound, "sup": sups, "lipschitz_direct": lips, "lipschitz_spread": spread}
        return passed, f"max sup {max(sups.values()):.4g} <= {bound:.4g}, Lipschitz spread {spread:.3g}", details

    def criterion_10(self):
        rng = np.random.default_rng(20240611)
        pair = self.pair
        fg = self.finger.with_rho(2.0)
        grid = cells.finger_grid(fg, 2.0, 1 / 8, 16)
        sl_model, _ = build_sl_model(DPProblem(pair, fg.classify, p2=0.5, discount=0.1), grid)
        h_left, h_right = pair.left.restrict_to_line(0.0), pair.right.restrict_to_line(0.0)
        line = Grid.interval(-3.0, 3.0, 97)
        pieces = [Piece(-4.0, 0.0, h_left, "L"), Piece(0.0, 4.0, h_right, "R")]
        jn_model = build_junction_model(pieces, [Junction(0.0, 0.5)], 0.1, line, pair.far_field_cost)
        monotone_fail = 0
        for k in range(RANDOM_PAIRS):
            model = sl_model if k % 2 == 0 else jn_model
            n = model.cost.shape[0]
            u = rng.normal(scale=3.0, size=n)
            w = u + rng.uniform(0.0, 2.0, size=n) * (rng.uniform(size=n) < 0.5)
            tu, _ = model.bellman(u)
            tw, _ = model.bellman(w)
            if np.any(tw < tu - 1e-12):
                monotone_fail += 1
        plain = junction_solve_1d(pieces, [], 1.0, line, pair.far_field_cost)
        off = junction_solve_1d(pieces, [Junction(0.0, -np.inf)], 1.0, line, pair.far_field_cost)
        junction_diff = float(np.max(np.abs(plain.values - off.values)))
        hashes = []
        with tempfile.TemporaryDirectory() as tmp:
            for rep in range(2):
                fld = value_iteration(DPProblem(pair, fg.classify, p2=0.5, discount=0.1), grid)
                path = fld.write_csv(Path(tmp) / f"run{rep}.csv")
                hashes.append(hashlib.sha256(path.read_bytes()).hexdigest())
        passed = monotone_fail == 0 and junction_diff <= ENGINE_TOL and hashes[0] == hashes[1]
        details = {"monotonicity_failures": monotone_fail, "pairs": RANDOM_PAIRS,
                   "limiter_off_difference": junction_diff, "hashes": hashes}
        summary = (f"monotonicity failures {monotone_fail}/{RANDOM_PAIRS}, limiter-off difference "
                   f"{junction_diff:.2g}, reruns identical: {hashes[0] == hashes[1]}")
        return passed, summary, details

    # driver -------------------------------------------------------------

    def run_one(self, number):
        start = time.perf_counter()
        try:
            passed, summary, details = getattr(self, f"criterion_{number}")()
        except HJError as exc:
            passed, summary, details = False, f"error: {type(exc).__name__}: {exc}", {
                "traceback": traceback.format_exc()}
        return CriterionResult(number, TITLES[number], bool(passed), summary, details,
                               time.perf_counter() - start)

    def run(self, numbers=None):
        return [self.run_one(n) for n in (numbers or sorted(TITLES))]
