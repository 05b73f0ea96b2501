"""Cell problems: effective Hamiltonian, flux limiters, thresholds and correctors.

Conventions
-----------
* ``p2`` is the momentum tangent to the interface, ``q`` the normal one.
* Every ergodic level is returned as the constant ``E`` for which the
  corrector equation ``H(Du + p2 e2) = E`` is solvable.
* The ``"LM"`` orientation is obtained by mirroring the medium pair and the
  finger geometry through ``x1 -> -x1`` and running the ``"MR"`` code path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .controls import ControlSide, e0 as control_e0
from .convex1d import Hamiltonian1D
from .engines.ergodic import DEFAULT_SCHEDULE, ErgodicResult
from .engines.grid import Grid, ValueField
from .engines.junction1d import Junction, Piece, ergodic_constant_1d
from .engines.semilagrangian import DPProblem, ergodic_constant
from .errors import EmptyLevelSet, InvalidArguments, ResolutionError
from .geometry import FingerGeometry, InterfaceSpec

# smaller discounts for the 1D periodic problem: it is cheap and the table
# must be convex to 1e-6
HM_SCHEDULE = (2e-3, 1e-3, 5e-4)
HM_NODES = 200
FINGER_RHOS = (2.0, 3.0, 4.0, 6.0)
LINE_RHOS = (4.0, 8.0, 16.0)
LIMITER_TOL = 5e-3
THRESHOLD_SNAP = 5e-3
# flat-bottom tolerance for tabulated Hamiltonians, whose minimum carries solver noise
TABLE_FLAT_TOL = 1e-7


# ---------------------------------------------------------------------------
# effective Hamiltonian of the oscillating strip

def _vertical_lines(pair, p):
    """``q -> H^i(p + q e2)`` for both media as 1D Hamiltonians."""
    p1, p2 = float(p[0]), float(p[1])
    lines = []
    for side in (pair.left, pair.right):
        v = side.velocities[:, 1]
        c = side.costs + p1 * side.velocities[:, 0] + p2 * v
        lines.append(Hamiltonian1D(v, c))
    return lines


def _periodic_cell_grid(profile, eta, nodes):
    """Periodic grid of one tooth period with nodes on both cap positions."""
    frac = profile.b - profile.a
    n = nodes
    for cand in range(nodes, 4 * nodes):
        if abs(frac * cand - round(frac * cand)) < 1e-9:
            n = cand
            break
    else:
        raise ResolutionError("no periodic grid up to four times the requested size hits both caps")
    return Grid.periodic_1d(eta, n, offset=eta * profile.a)


def effective_hm_result(pair, profile, eta, p, nodes=HM_NODES, schedule=HM_SCHEDULE):
    """Ergodic solve of the 1D cell problem in the fast tangential variable."""
    h_left, h_right = _vertical_lines(pair, p)
    grid = _periodic_cell_grid(profile, eta, nodes)
    lo, hi = eta * profile.a, eta * profile.b
    pieces = [Piece(lo, hi, h_left, "L"), Piece(hi, lo + eta, h_right, "R")]
    return ergodic_constant_1d(pieces, [], grid, schedule, anchor=lo)


def effective_hm(pair, profile, eta, p, nodes=HM_NODES, schedule=HM_SCHEDULE):
    """Effective Hamiltonian of the strip at momentum ``p``."""
    return effective_hm_result(pair, profile, eta, p, nodes, schedule).constant


def hm_oracle(pair, profile, p, tol=1e-12):
    """Branch-selection formula for piecewise-constant 1D media.

    The smallest level ``lam`` for which the weighted branch roots of the two
    media bracket zero.
    """
    h_left, h_right = _vertical_lines(pair, p)
    weights = (profile.b - profile.a, 1.0 - (profile.b - profile.a))

    def feasible(lam):
        lo = hi = 0.0
        for w, ham in zip(weights, (h_left, h_right)):
            qm, qp = ham.level_roots(lam, tol=0.0)
            lo += w * qm
            hi += w * qp
        return lo <= 0.0 <= hi

    a = max(h_left.e0, h_right.e0)
    if feasible(a):
        return a
    b = max(float(h_left(0.0)), float(h_right(0.0)))
    while b - a > tol * max(1.0, abs(b)):
        mid = 0.5 * (a + b)
        if feasible(mid):
            b = mid
        else:
            a = mid
    return b


@dataclass(frozen=True, eq=False)
class EffectiveTable:
    """Tabulated effective Hamiltonian on a tensor grid of momenta.

    Along ``p1`` the table is extended by its secants (the outermost secants
    continue linearly); between ``p2`` rows it is interpolated linearly and
    extrapolated from the two outermost rows.
    """

    p1: np.ndarray
    p2: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float))
        object.__setattr__(self, "p2", np.asarray(self.p2, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != (self.p1.size, self.p2.size):
            raise InvalidArguments("table values must have shape (len(p1), len(p2))")

    def _row(self, p2):
        ax = self.p2
        if ax.size == 1:
            if abs(p2 - ax[0]) > 1e-12:
                raise InvalidArguments(f"single-row table at p2={ax[0]} cannot be evaluated at p2={p2}")
            return self.values[:, 0]
        j = int(np.clip(np.searchsorted(ax, p2) - 1, 0, ax.size - 2))
        w = (p2 - ax[j]) / (ax[j + 1] - ax[j])
        return (1 - w) * self.values[:, j] + w * self.values[:, j + 1]

    def line(self, p2):
        """``q -> H^M(q e1 + p2 e2)`` as a 1D Hamiltonian."""
        return Hamiltonian1D.from_samples(self.p1, self._row(float(p2)))

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return float(self.line(p[1])(p[0]))

    def e0(self, p2):
        return self.line(p2).e0

    def e0_interval(self, p2):
        return self.line(p2).argmin_interval()

    def mirrored(self):
        """Table of ``p -> H^M(-p1, p2)``."""
        return EffectiveTable(-self.p1[::-1], self.p2, self.values[::-1, :], dict(self.meta, mirrored=True))

    def write_csv(self, path, extra_columns=None):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            names = list(extra_columns or {})
            w.writerow(["p1", "p2", "HM", *names])
            for i, a in enumerate(self.p1):
                for j, b in enumerate(self.p2):
                    extra = [f"{extra_columns[k][i, j]:.17g}" for k in names]
                    w.writerow([f"{a:.17g}", f"{b:.17g}", f"{self.values[i, j]:.17g}", *extra])
        return path


def effective_table(pair, profile, eta, p1_axis, p2_axis, nodes=HM_NODES, schedule=HM_SCHEDULE,
                    mapper=map):
    """Tabulate :func:`effective_hm`; ``mapper`` may be a parallel map."""
    p1_axis = np.asarray(p1_axis, dtype=float)
    p2_axis = np.asarray(p2_axis, dtype=float)
    jobs = [(pair, profile, eta, (a, b), nodes, schedule) for a in p1_axis for b in p2_axis]
    vals = list(mapper(_hm_job, jobs))
    table = np.array(vals).reshape(p1_axis.size, p2_axis.size)
    return EffectiveTable(p1_axis, p2_axis, table, {"eta": eta, "nodes": nodes, "schedule": list(schedule)})


def _hm_job(args):
    return effective_hm(*args)


def convexity_violation(table):
    """Largest midpoint-convexity defect along grid lines and diagonals of a uniform table."""
    v = table.values
    worst = 0.0
    for sl in ((slice(None, -2), slice(1, -1), slice(2, None)),):
        a, m, b = sl
        if v.shape[0] >= 3:
            worst = max(worst, float(np.max(v[m, :] - 0.5 * (v[a, :] + v[b, :]))))
        if v.shape[1] >= 3:
            worst = max(worst, float(np.max(v[:, m] - 0.5 * (v[:, a] + v[:, b]))))
        if min(v.shape) >= 3:
            worst = max(worst, float(np.max(v[m, m] - 0.5 * (v[a, a] + v[b, b]))))
            worst = max(worst, float(np.max(v[m, m] - 0.5 * (v[a, b] + v[b, a]))))
    return max(worst, 0.0)


# ---------------------------------------------------------------------------
# truncated cell problems

@dataclass
class LimiterEstimate:
    """Result of a truncation sweep ``rho -> level(rho)``."""

    value: float
    converged: bool
    rhos: list
    levels: list
    increments: list
    last: ErgodicResult
    meta: dict = field(default_factory=dict)

    @property
    def monotone_defect(self):
        """Largest decrease of the level along the truncation schedule."""
        d = np.diff(self.levels)
        return float(max(0.0, -d.min())) if d.size else 0.0


def _check_rhos(rhos):
    rhos = [float(r) for r in rhos]
    if len(rhos) < 2 or any(b <= a for a, b in zip(rhos, rhos[1:])):
        raise InvalidArguments("truncation schedule must be increasing with at least two entries")
    return rhos


def _sweep(rhos, solve_one, tol):
    rhos = _check_rhos(rhos)
    levels, results = [], []
    for rho in rhos:
        res = solve_one(rho)
        levels.append(res.constant)
        results.append(res)
    inc = [abs(b - a) for a, b in zip(levels, levels[1:])]
    return LimiterEstimate(levels[-1], inc[-1] < tol, rhos, levels, inc, results[-1],
                           {"ergodic_converged": [r.converged for r in results]})


@dataclass
class FluxLimiterCurve:
    """Sampled limiter ``p2 -> value`` with the truncation data behind each sample.

    ``kind`` is one of ``E0_L``, ``E0_R``, ``E0_M``, ``E0_LM``, ``E0_MR``,
    ``E_LM``, ``E_MR``, ``E_limit`` or ``E_eps(<eps>)``.  Between samples the
    curve is interpolated linearly; outside it is held constant.
    """

    kind: str
    p2: list
    values: list
    rho_schedule: list = field(default_factory=list)
    increments: list = field(default_factory=list)
    converged: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.p2) != len(self.values) or not self.p2:
            raise InvalidArguments("a limiter curve needs matching, nonempty p2 and value lists")
        if any(b <= a for a, b in zip(self.p2, self.p2[1:])):
            raise InvalidArguments("limiter curve samples must be strictly increasing in p2")

    @classmethod
    def from_estimates(cls, kind, p2_samples, estimates):
        """Curve from :class:`LimiterEstimate` objects, one per sample."""
        return cls(kind, [float(p) for p in p2_samples], [e.value for e in estimates],
                   list(estimates[0].rhos), [e.increments[-1] for e in estimates],
                   [e.converged for e in estimates])

    @classmethod
    def from_function(cls, kind, p2_samples, fn):
        p2_samples = [float(p) for p in p2_samples]
        return cls(kind, p2_samples, [float(fn(p)) for p in p2_samples])

    def __call__(self, p2):
        return float(np.interp(p2, self.p2, self.values))

    def write_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p2", self.kind, "last_increment", "converged"])
            for i, (p, v) in enumerate(zip(self.p2, self.values)):
                inc = f"{self.increments[i]:.17g}" if self.increments else ""
                conv = str(bool(self.converged[i])) if self.converged else ""
                w.writerow([f"{p:.17g}", f"{v:.17g}", inc, conv])
        return path


def oriented(pair, fg, orientation):
    if orientation == "MR":
        return pair, fg
    if orientation == "LM":
        return pair.mirrored(), fg.mirrored()
    raise InvalidArguments(f"orientation must be 'MR' or 'LM', got {orientation!r}")


def finger_grid(fg, rho, h1=1 / 16, n2=32):
    if n2 < 16:
        raise ResolutionError("finger problems need at least 16 nodes per period")
    n1 = int(round(2 * rho / h1)) + 1
    return Grid.strip(-rho, rho, n1, fg.eta, n2)


def lambda_rho(pair, fg, p2, rho, orientation="MR", h1=1 / 16, n2=32, schedule=DEFAULT_SCHEDULE):
    """Ergodic constant of the state-constrained finger problem on ``|y1| <= rho``.

    Cell problems see the media only; a far-field cost on ``pair`` is dropped.
    """
    pr, geom = oriented(pair.with_far_field(None), fg.with_rho(rho), orientation)
    grid = finger_grid(geom, rho, h1, n2)
    problem = DPProblem(pr, geom.classify, p2=p2)
    return ergodic_constant(problem, grid, schedule, anchor=(0.0, 0.0))


def flux_limiter(pair, fg, orientation, p2, rho_schedule=FINGER_RHOS, tol=LIMITER_TOL, **kw):
    """Limiter ``E^{M,R}`` (or ``E^{L,M}``) as the large-truncation limit of :func:`lambda_rho`."""
    est = _sweep(rho_schedule, lambda r: lambda_rho(pair, fg, p2, r, orientation, **kw), tol)
    est.meta.update(kind="E_MR" if orientation == "MR" else "E_LM", p2=p2)
    return est


def _line_of(evaluator, p2):
    if isinstance(evaluator, ControlSide):
        return evaluator.restrict_to_line(p2)
    if isinstance(evaluator, Hamiltonian1D):
        return evaluator
    return evaluator.line(p2)


def line_problem(pair, hm, limiters, p2, rho, h=1 / 32):
    """Pieces, junctions and grid of the three-medium 1D truncated problem."""
    h_left = pair.left.restrict_to_line(p2)
    h_mid = _line_of(hm, p2)
    h_right = pair.right.restrict_to_line(p2)
    n = int(round(2 * rho / h)) + 1
    grid = Grid.interval(-rho, rho, n)
    pieces = [Piece(-rho - 1, -1.0, h_left, "L"), Piece(-1.0, 1.0, h_mid, "M"), Piece(1.0, rho + 1, h_right, "R")]
    junctions = [Junction(-1.0, limiters[0]), Junction(1.0, limiters[1])]
    return pieces, junctions, grid


def mu_rho(pair, hm, limiters, p2, rho, h=1 / 32, schedule=DEFAULT_SCHEDULE):
    pieces, junctions, grid = line_problem(pair, hm, limiters, p2, rho, h)
    return ergodic_constant_1d(pieces, junctions, grid, schedule, anchor=0.0)


def flux_limiter_1d(pair, hm, limiters, p2, rho_schedule=LINE_RHOS, tol=LIMITER_TOL, h=1 / 32,
                    schedule=DEFAULT_SCHEDULE):
    """Limiter ``E`` of the flat interface from the 1D truncated problem."""
    est = _sweep(rho_schedule, lambda r: mu_rho(pair, hm, limiters, p2, r, h, schedule), tol)
    est.meta.update(kind="E_limit", p2=p2, limiters=list(limiters))
    return est


def epsilon_grid(spec, rho, nodes_per_eps=16, h1=None):
    if nodes_per_eps < 16:
        raise ResolutionError(f"period eps={spec.eps} needs at least 16 nodes, got {nodes_per_eps}")
    if h1 is None:
        h1 = min(1 / 16, spec.eps / 4)
    n1 = int(round(2 * rho / h1)) + 1
    return Grid.strip(-rho, rho, n1, spec.period, nodes_per_eps)


def epsilon_level(pair, spec, p2, rho, nodes_per_eps=16, h1=None, schedule=DEFAULT_SCHEDULE):
    if abs(spec.eta - 1.0) > 1e-12:
        raise InvalidArguments("the epsilon cell problem uses the dilated geometry with eta = 1")
    if rho <= spec.max_extent():
        raise InvalidArguments("truncation must contain the whole interface")
    grid = epsilon_grid(spec, rho, nodes_per_eps, h1)
    problem = DPProblem(pair.with_far_field(None), spec.classify, p2=p2)
    return ergodic_constant(problem, grid, schedule, anchor=(0.0, 0.0))


def epsilon_flux_limiter(pair, spec, p2, rho_schedule=FINGER_RHOS, tol=LIMITER_TOL, **kw):
    """``E_eps(p2)`` from the two-sided truncated problem on the full oscillating interface."""
    est = _sweep(rho_schedule, lambda r: epsilon_level(pair, spec, p2, r, **kw), tol)
    est.meta.update(kind=f"E_eps({spec.eps:g})", p2=p2)
    return est


# ---------------------------------------------------------------------------
# slope thresholds and corrector checks

@dataclass(frozen=True)
class SlopeThresholds:
    """Extreme momenta where a Hamiltonian and one monotone branch meet ``level``."""

    side: str
    p2: float
    level: float
    lo: float
    hi: float
    branch: str
    degenerate: bool


def slope_thresholds(evaluator, p2, level, branch, side="", snap=THRESHOLD_SNAP, flat_tol=None):
    """Thresholds of ``q -> H(q e1 + p2 e2)`` at ``level`` on the given branch.

    Levels within ``snap`` of the minimum are treated as the minimum, whose
    threshold set is the whole minimizing interval.  For tabulated
    Hamiltonians that interval is read off at ``E0 + flat_tol``.
    """
    if branch not in ("plus", "minus"):
        raise InvalidArguments("branch must be 'plus' or 'minus'")
    line = _line_of(evaluator, p2)
    if flat_tol is None:
        flat_tol = TABLE_FLAT_TOL if isinstance(evaluator, EffectiveTable) else 0.0
    if level < line.e0 - snap:
        raise EmptyLevelSet(f"level {level:.6g} is below E0 = {line.e0:.6g}")
    if level <= line.e0 + snap:
        lo, hi = line.level_roots(line.e0 + flat_tol, tol=0.0) if flat_tol > 0 else line.argmin_interval()
        return SlopeThresholds(side, p2, line.e0, lo, hi, branch, False)
    q_minus, q_plus = line.level_roots(level)
    q = q_plus if branch == "plus" else q_minus
    return SlopeThresholds(side, p2, level, q, q, branch, True)


@dataclass
class CorrectorProfile:
    """Corrector field with the rescaling ``W(y) = s * chi(y / s)`` used for slope checks."""

    field: ValueField
    rescale: float
    anchor: tuple = (0.0,)

    def __post_init__(self):
        val = self.field(self.anchor) if self.field.grid.dim == len(self.anchor) else None
        if val is not None and abs(val) > 1e-9:
            self.field = self.field.shifted(val)


@dataclass
class SlopeReport:
    passed: bool
    sandwich_violations: int
    sandwich_nodes: int
    worst_sandwich_excess: float
    growth: dict
    slopes: dict

    @property
    def violation_rate(self):
        return self.sandwich_violations / max(self.sandwich_nodes, 1)


def wedge(left, right, y1):
    """Lower and upper wedge functions built from left (minus) and right (plus) thresholds."""
    neg = np.maximum(-y1, 0.0)
    pos = np.maximum(y1, 0.0)
    lower = -left.hi * neg + right.lo * pos
    upper = -left.lo * neg + right.hi * pos
    return lower, upper


def _columns(field):
    """(x1 axis, per-column min, per-column max) of a 1D or 2D field."""
    x1 = field.grid.axis(0)
    v = field.values
    if v.ndim == 1:
        return x1, v, v
    return x1, v.min(axis=1), v.max(axis=1)


def _growth_check(x1, cmin, cmax, slope, direction, rho_star, tol):
    """Fit ``M*`` on short pairs and validate ``chi(y + d h) - chi(y) >= slope*h - M*`` on long ones."""
    if direction > 0:
        sel = np.flatnonzero(x1 >= rho_star)
    else:
        sel = np.flatnonzero(x1 <= -rho_star)[::-1]
    if sel.size < 4:
        return {"checked": 0, "violations": 0, "M_star": 0.0}
    span = abs(x1[sel[-1]] - x1[sel[0]])
    short = 0.25 * span
    deficits_short, longs = [], []
    for a in range(sel.size):
        for b in range(a + 1, sel.size):
            h = abs(x1[sel[b]] - x1[sel[a]])
            # the far node of the pair against the near node, over all y2 shifts
            gain = cmin[sel[b]] - cmax[sel[a]]
            deficit = slope * h - gain
            (deficits_short if h <= short else longs).append((h, deficit))
    m_star = max(0.0, max(d for _, d in deficits_short)) if deficits_short else 0.0
    bad = sum(1 for h, d in longs if d > m_star + tol * h)
    return {"checked": len(longs), "violations": bad, "M_star": m_star, "rho_star": rho_star}


def corrector_slope_check(profile, left, right, tol=0.05, max_rate=0.01, growth=True):
    """Check the rescaled corrector against the threshold wedge.

    ``left`` holds the thresholds of the medium on ``y1 < 0`` (minus branch),
    ``right`` those on ``y1 > 0`` (plus branch).  Also checks the growth
    bounds on the outer thirds of the domain when the thresholds are
    unique.
    """
    fld = profile.field
    s = profile.rescale
    x1 = fld.grid.axis(0)
    vals = fld.values if fld.values.ndim == 2 else fld.values[:, None]
    y1 = s * x1
    lower, upper = wedge(left, right, y1)
    w = s * vals
    excess = np.maximum(lower[:, None] - w, w - upper[:, None])
    nodes = excess.size
    violations = int(np.count_nonzero(excess > tol))
    worst = float(max(excess.max(), 0.0))

    x1c, cmin, cmax = _columns(fld)
    dx = np.diff(x1c)
    slopes = {
        "left_min": float(np.min(np.diff(cmax)[x1c[1:] <= 0] / dx[x1c[1:] <= 0])) if np.any(x1c[1:] <= 0) else None,
        "right_max": float(np.max(np.diff(cmin)[x1c[:-1] >= 0] / dx[x1c[:-1] >= 0])) if np.any(x1c[:-1] >= 0) else None,
    }
    growth_report = {}
    ok_growth = True
    if growth:
        rho = float(max(abs(x1c[0]), abs(x1c[-1])))
        if right.degenerate:
            growth_report["right"] = _growth_check(x1c, cmin, cmax, right.lo, +1, rho / 3, tol)
        if left.degenerate:
            # moving left by h changes chi by at least -Pi^left * h - M*
            growth_report["left"] = _growth_check(x1c, cmin, cmax, -left.lo, -1, rho / 3, tol)
        for rep in growth_report.values():
            if rep["checked"] and rep["violations"] / rep["checked"] >= max_rate:
                ok_growth = False
    passed = violations / max(nodes, 1) < max_rate and ok_growth
    return SlopeReport(passed, violations, nodes, worst, growth_report, slopes)
