"""Effective transmission problems and the direct oscillating-interface problem.

The data are invariant in ``x2`` (the far-field cost depends on ``x1`` only),
so the effective problems reduce to 1D junction problems in ``x1`` with the
limiters evaluated at zero tangential momentum.  The direct problem is
solved in 2D on one tooth period in ``x2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cells import FluxLimiterCurve, _line_of
from .engines.grid import Grid, ValueField
from .engines.junction1d import Junction, Piece, junction_solve_1d
from .engines.semilagrangian import DPProblem, value_iteration
from .errors import InvalidArguments, OutOfWindow, ResolutionError
from .geometry import InterfaceSpec

KINDS = ("direct", "eta", "flat")
DEFAULT_WINDOW = (-6.0, 6.0)
DEFAULT_H = 1 / 80


@dataclass(frozen=True)
class EffectiveProblemSpec:
    """One of the three problems compared in the convergence studies.

    Attributes
    ----------
    kind : str
        ``"direct"`` (oscillating interface of size ``eta`` and period
        ``eta*eps``), ``"eta"`` (strip of half-width ``eta`` with the effective
        Hamiltonian) or ``"flat"`` (single flux-limited junction at 0).
    limiters : dict
        ``{"LM": ..., "MR": ...}`` for ``"eta"``, ``{"E": ...}`` for
        ``"flat"``; each entry is a :class:`FluxLimiterCurve` (read at
        ``p2 = 0``) or a number.
    hm : EffectiveTable or Hamiltonian1D
        Effective Hamiltonian (only for ``"eta"``).
    h : float
        Spacing in ``x1``; junction positions must be grid nodes.
    cells_per_period : int
        Nodes per tooth period in ``x2`` for ``"direct"``.
    """

    kind: str
    pair: object
    discount: float = 1.0
    eta: Optional[float] = None
    eps: Optional[float] = None
    profile: object = None
    hm: object = None
    limiters: dict = field(default_factory=dict)
    window: tuple = DEFAULT_WINDOW
    h: float = DEFAULT_H
    cells_per_period: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArguments(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.discount <= 0:
            raise InvalidArguments("discount must be positive")
        lo, hi = self.window
        if not lo < 0 < hi:
            raise InvalidArguments("window must contain the interface at x1 = 0")


def _limiter_at_zero(limiter):
    """Limiter value at zero tangential momentum from a curve or a number."""
    if isinstance(limiter, FluxLimiterCurve):
        return limiter(0.0)
    return float(limiter)


def _grid_1d(spec):
    lo, hi = spec.window
    n = int(round((hi - lo) / spec.h)) + 1
    grid = Grid.interval(lo, hi, n)
    if abs(grid.spacing[0] - spec.h) > 1e-9 * spec.h:
        raise ResolutionError(f"window {spec.window} is not a whole number of cells of size {spec.h}")
    return grid


def _needs_node(grid, x):
    s = (x - grid.origin[0]) / grid.spacing[0]
    if abs(s - round(s)) > 1e-6:
        raise ResolutionError(f"junction at {x} does not fall on a grid node of spacing {grid.spacing[0]}")


def solve_effective(spec):
    """Solve the requested problem; returns a 1D field (``eta``/``flat``) or a 2D field (``direct``)."""
    pair = spec.pair
    far = pair.far_field_cost
    lo, hi = spec.window
    if spec.kind == "direct":
        return _solve_direct(spec)
    grid = _grid_1d(spec)
    h_left = pair.left.restrict_to_line(0.0)
    h_right = pair.right.restrict_to_line(0.0)
    if spec.kind == "flat":
        if "E" not in spec.limiters:
            raise InvalidArguments("flat problem needs limiters['E']")
        pieces = [Piece(lo - 1, 0.0, h_left, "L"), Piece(0.0, hi + 1, h_right, "R")]
        junctions = [Junction(0.0, _limiter_at_zero(spec.limiters["E"]))]
    else:
        if spec.eta is None or spec.hm is None:
            raise InvalidArguments("strip problem needs eta and the effective Hamiltonian")
        if not ("LM" in spec.limiters and "MR" in spec.limiters):
            raise InvalidArguments("strip problem needs limiters['LM'] and limiters['MR']")
        eta = spec.eta
        for x in (-eta, eta):
            _needs_node(grid, x)
        h_mid = _line_of(spec.hm, 0.0)
        pieces = [Piece(lo - 1, -eta, h_left, "L"), Piece(-eta, eta, h_mid, "M"), Piece(eta, hi + 1, h_right, "R")]
        junctions = [Junction(-eta, _limiter_at_zero(spec.limiters["LM"])),
                     Junction(eta, _limiter_at_zero(spec.limiters["MR"]))]
    fld = junction_solve_1d(pieces, junctions, spec.discount, grid, running_cost=far)
    fld.meta.update(kind=spec.kind, eta=spec.eta, limiters={k: _limiter_at_zero(v) for k, v in spec.limiters.items()})
    return fld


def _solve_direct(spec):
    if spec.eta is None or spec.eps is None or spec.profile is None:
        raise InvalidArguments("direct problem needs eta, eps and a profile")
    if spec.cells_per_period < 8:
        raise ResolutionError(f"tooth period eta*eps must span at least 8 cells, got {spec.cells_per_period}")
    geom = InterfaceSpec(spec.profile, spec.eta, spec.eps)
    lo, hi = spec.window
    n1 = int(round((hi - lo) / spec.h)) + 1
    grid = Grid.strip(lo, hi, n1, geom.period, spec.cells_per_period)
    problem = DPProblem(spec.pair, geom.classify, p2=0.0, discount=spec.discount)
    fld = value_iteration(problem, grid)
    fld.meta.update(kind="direct", eta=spec.eta, eps=spec.eps)
    return fld


@dataclass
class ComparisonReport:
    points: list
    errors: list
    max_error: float
    mean_error: float


def _sample(fld, points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if fld.grid.dim == 1:
        return fld.interpolate(pts[:, :1])
    if pts.shape[1] == 1:
        pts = np.hstack([pts, np.zeros((pts.shape[0], 1))])
    return fld.interpolate(pts)


def compare_fields(a, b, sample_points):
    """Pointwise ``|a - b|`` at sample points; a 1D field is read as ``x2``-invariant."""
    pts = [tuple(np.atleast_1d(p).astype(float)) for p in sample_points]
    bad = []
    for fld in (a, b):
        for p in pts:
            try:
                _sample(fld, [p])
            except OutOfWindow:
                bad.append(p)
    if bad:
        raise OutOfWindow(sorted(set(bad)))
    err = np.abs(_sample(a, pts) - _sample(b, pts))
    return ComparisonReport(pts, [float(e) for e in err], float(err.max()), float(err.mean()))
