"""Semi-Lagrangian dynamic programming on 2D grids with two media.

A node may use the controls of side ``i`` only when the geometry places it in
the closure of medium ``i`` (region ``i`` or on the interface).  One step of
control ``a`` costs ``dt_a * (l(a) + c(x1) + p2 * f2(a))`` and lands at the
Euler foot ``x + dt_a * f(a)``, where the value is interpolated bilinearly and
discounted by ``1/(1 + lam*dt_a)`` (``"implicit"``, default) or by
``1 - lam*dt_a`` (``"explicit"``).  Feet leaving the box in a non-periodic
direction are inadmissible, which realises state constraints on the box.

Two time-step rules are available.  ``"uniform"`` uses
``dt = cfl * min(h) / M_f`` for every control.  ``"adapted"`` (default) uses
``dt_a = min_k h_k / |f_k(a)|`` so that axis-aligned velocities land exactly
on a neighbouring node; the scheme is then a monotone upwind scheme with no
interpolation diffusion along the axes.  With implicit discounting it
coincides with the 1D upwind junction scheme on ``x2``-invariant data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from ..errors import InvalidArguments
from ..geometry import Region
from .ergodic import run_schedule
from .grid import Grid, ValueField
from .mdp import DecisionModel, solve

UNIFORM_CFL = 0.4


@dataclass(frozen=True)
class DPProblem:
    """Discounted two-media control problem.

    Attributes
    ----------
    pair : MediumPair
    membership : callable or None
        ``membership(x1, x2)`` returns :class:`~hjhomog.geometry.Region`
        codes.  ``None`` lets every node use both sides.
    p2 : float
        Tangential momentum; adds ``p2 * f2`` to the running cost.
    discount : float
    time_step : str
        ``"adapted"`` or ``"uniform"``.
    cfl : float
        Courant number of the uniform rule.
    discounting : str
        ``"implicit"`` or ``"explicit"``.
    """

    pair: object
    membership: Optional[Callable] = None
    p2: float = 0.0
    discount: float = 1.0
    time_step: str = "adapted"
    cfl: float = UNIFORM_CFL
    discounting: str = "implicit"

    def with_discount(self, lam):
        return replace(self, discount=lam)


def _step_sizes(vel, spacing, mode, cfl, speed_bound):
    hmin = min(spacing)
    # with only still controls any step is exact; use one spacing
    speed_bound = speed_bound if speed_bound > 0 else 1.0
    if mode == "uniform":
        return np.full(vel.shape[0], cfl * hmin / speed_bound)
    if mode != "adapted":
        raise InvalidArguments(f"unknown time-step rule {mode!r}")
    with np.errstate(divide="ignore"):
        per_axis = np.where(np.abs(vel) > 0, np.asarray(spacing) / np.abs(vel), np.inf)
    dt = per_axis.min(axis=1)
    dt[~np.isfinite(dt)] = hmin / speed_bound
    return dt


def build_sl_model(problem, grid):
    """Assemble the decision model of the semi-Lagrangian scheme."""
    if grid.dim != 2:
        raise InvalidArguments("semi-Lagrangian engine needs a 2D grid")
    lam = problem.discount
    if lam <= 0:
        raise InvalidArguments("discount must be positive")
    pair = problem.pair
    x1, x2 = (c.ravel() for c in grid.mesh())
    n = x1.size
    if problem.membership is None:
        codes = np.full(n, Region.ON, dtype=np.int8)
    else:
        codes = np.asarray(problem.membership(x1, x2), dtype=np.int8).ravel()
    far = pair.far_field_cost(x1) if pair.far_field_cost is not None else np.zeros(n)

    vel = np.concatenate([pair.left.velocities, pair.right.velocities])
    ell = np.concatenate([pair.left.costs, pair.right.costs])
    side = np.concatenate([np.full(len(pair.left.controls), Region.LEFT),
                           np.full(len(pair.right.controls), Region.RIGHT)])
    dt = _step_sizes(vel, grid.spacing, problem.time_step, problem.cfl, pair.speed_bound)
    if problem.discounting == "explicit":
        if np.any(lam * dt >= 1.0):
            raise InvalidArguments("discount times time step must stay below one")
        factor = 1.0 - lam * dt
    elif problem.discounting == "implicit":
        factor = 1.0 / (1.0 + lam * dt)
    else:
        raise InvalidArguments(f"unknown discounting {problem.discounting!r}")

    k = vel.shape[0]
    cost = np.full((n, k), np.inf)
    index = np.zeros((n, k, 4), dtype=np.int64)
    weight = np.zeros((n, k, 4))
    for a in range(k):
        usable = (codes == side[a]) | (codes == Region.ON)
        foot = np.stack([x1 + dt[a] * vel[a, 0], x2 + dt[a] * vel[a, 1]], axis=1)
        idx, w, inside = grid.stencil(foot)
        ok = usable & inside
        running = ell[a] + far + problem.p2 * vel[a, 1]
        scale = 1.0 if problem.discounting == "explicit" else factor[a]
        cost[:, a] = np.where(ok, scale * dt[a] * running, np.inf)
        index[:, a, :] = idx
        weight[:, a, :] = factor[a] * w
    return DecisionModel(cost, index, weight), dt


def value_iteration(problem, grid, method="howard", policy=None):
    """Fixed point of the semi-Lagrangian update as a :class:`ValueField`."""
    model, dt = build_sl_model(problem, grid)
    kwargs = {"policy": policy} if method == "howard" and policy is not None else {}
    sol = solve(model, method, **kwargs)
    meta = {"scheme": f"semi-lagrangian-{problem.time_step}-{problem.discounting}", "dt_min": float(dt.min()),
            "dt_max": float(dt.max()), "discount": problem.discount, "residual": sol.residual,
            "iterations": sol.iterations, "method": sol.method, "policy": sol.policy}
    return ValueField(grid, sol.values, meta)


def ergodic_constant(problem, grid, schedule, anchor=(0.0, 0.0)):
    """Ergodic level ``-lim lam * V_lam(anchor)`` by discount extrapolation."""
    anchor_index = int(np.ravel_multi_index(grid.nearest_index(anchor), grid.counts))

    def run(lam, policy):
        field = value_iteration(problem.with_discount(lam), grid, policy=policy)
        info = {k: field.meta[k] for k in ("residual", "iterations")}
        return field.values.ravel(), field.meta["policy"], info

    def wrap(values, meta):
        return ValueField(grid, values, dict(meta, scheme=f"semi-lagrangian-{problem.time_step}"))

    return run_schedule(run, schedule, anchor_index, wrap)
