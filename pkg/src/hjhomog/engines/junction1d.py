"""Monotone upwind scheme for 1D Hamilton-Jacobi equations with junctions.

The equation ``lam*u + H_x(u') = c(x)`` is discretised with the Godunov flux
of each convex piecewise-linear Hamiltonian.  Written in control form every
node chooses one affine piece ``(v, cost)`` of the local Hamiltonian:

* ``v < 0`` looks at the left neighbour, ``v > 0`` at the right one, with
  ``u_i = (cost + c(x_i) + r*u_nb) / (lam + r)`` and ``r = |v|/h``;
* ``v = 0`` gives ``u_i = (cost + c(x_i)) / lam``.

At a junction node the left Hamiltonian only contributes pieces with
``v <= 0`` (its nondecreasing part evaluated on the backward difference),
the right Hamiltonian pieces with ``v >= 0``, and a flux limiter ``A`` adds
the option ``u_i = (c(x_i) - A) / lam``.  A piece boundary that is not a
declared junction behaves like a junction with limiter ``-inf``.  End nodes
of a non-periodic grid only allow inward moves (state constraint).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..convex1d import Hamiltonian1D
from ..errors import InvalidArguments, NonCoerciveHamiltonian
from .ergodic import run_schedule
from .grid import Grid, ValueField
from .mdp import DecisionModel, solve

POSITION_TOL = 1e-9


@dataclass(frozen=True)
class Piece:
    """Hamiltonian ``hamiltonian`` on the open interval ``(lo, hi)``."""

    lo: float
    hi: float
    hamiltonian: Hamiltonian1D
    name: str = ""


@dataclass(frozen=True)
class Junction:
    """Flux-limited junction at ``position``.

    ``left`` / ``right`` override the Hamiltonians of the adjacent pieces when
    given.  ``limiter = -inf`` switches the limiter off.
    """

    position: float
    limiter: float
    left: Optional[Hamiltonian1D] = None
    right: Optional[Hamiltonian1D] = None


def _contains(piece, x, period):
    if period is None:
        return (x > piece.lo) & (x < piece.hi)
    return np.mod(x - piece.lo, period) < (piece.hi - piece.lo)


def _node_pieces(pieces, x, period, side_offset):
    """Index of the piece containing ``x + side_offset`` for every node (-1 if none)."""
    out = np.full(x.shape, -1, dtype=np.int64)
    for k, pc in enumerate(pieces):
        hit = _contains(pc, x + side_offset, period) & (out < 0)
        out[hit] = k
    return out


def _coercivity_probe(ham):
    if not (np.any(ham.velocity < 0) and np.any(ham.velocity > 0)):
        raise NonCoerciveHamiltonian("piece Hamiltonian is not coercive")


def build_junction_model(pieces, junctions, lam, grid, running_cost=None):
    """Assemble the decision model of the scheme on a 1D grid."""
    if grid.dim != 1:
        raise InvalidArguments("junction scheme needs a 1D grid")
    if lam <= 0:
        raise InvalidArguments("discount must be positive")
    for pc in pieces:
        _coercivity_probe(pc.hamiltonian)
    h = grid.spacing[0]
    n = grid.counts[0]
    periodic = grid.periodic_axis == 0
    period = grid.period if periodic else None
    x = grid.axis(0)
    rc = np.zeros(n) if running_cost is None else np.asarray(running_cost(x), dtype=float)

    left_of = _node_pieces(pieces, x, period, -0.5 * h)
    right_of = _node_pieces(pieces, x, period, 0.5 * h)
    # end nodes of a bounded grid take the piece on their inner side
    if not periodic:
        left_of[0] = right_of[0]
        right_of[-1] = left_of[-1]
    if np.any(left_of < 0) or np.any(right_of < 0):
        bad = x[(left_of < 0) | (right_of < 0)]
        raise InvalidArguments(f"pieces do not tile the grid; uncovered node(s) near {bad[:3]}")

    lim = np.full(n, -np.inf)
    left_h = [pieces[k].hamiltonian for k in left_of]
    right_h = [pieces[k].hamiltonian for k in right_of]
    for jn in junctions:
        pos = jn.position
        d = x - pos
        if periodic:
            d = (d + 0.5 * period) % period - 0.5 * period
        hit = np.flatnonzero(np.abs(d) <= POSITION_TOL * max(1.0, abs(pos)))
        if hit.size != 1:
            raise InvalidArguments(f"junction at {pos} does not coincide with a grid node")
        i = int(hit[0])
        lim[i] = jn.limiter
        if jn.left is not None:
            left_h[i] = jn.left
        if jn.right is not None:
            right_h[i] = jn.right

    # build option lists node by node; nodes sharing the same data share a template
    templates = {}
    opts_v, opts_c, opts_node = [], [], []
    per_node = []
    for i in range(n):
        key = (id(left_h[i]), id(right_h[i]))
        if key not in templates:
            lh, rh = left_h[i], right_h[i]
            if lh is rh:
                v, c = lh.velocity, lh.cost
            else:
                ml = lh.velocity <= 0
                mr = rh.velocity >= 0
                v = np.concatenate([lh.velocity[ml], rh.velocity[mr]])
                c = np.concatenate([lh.cost[ml], rh.cost[mr]])
            templates[key] = (v, c)
        per_node.append(templates[key])
    kmax = max(t[0].size for t in templates.values()) + 1  # +1 for the limiter

    cost = np.full((n, kmax), np.inf)
    index = np.zeros((n, kmax, 1), dtype=np.int64)
    weight = np.zeros((n, kmax, 1))
    for i, (v, c) in enumerate(per_node):
        m = v.size
        r = np.abs(v) / h
        nb = np.where(v < 0, i - 1, np.where(v > 0, i + 1, i))
        ok = np.ones(m, dtype=bool)
        if periodic:
            nb %= n
        else:
            ok &= (nb >= 0) & (nb < n)
            nb = np.clip(nb, 0, n - 1)
        denom = lam + r
        cost[i, :m] = np.where(ok, (c + rc[i]) / denom, np.inf)
        index[i, :m, 0] = nb
        weight[i, :m, 0] = np.where(v == 0, 0.0, r / denom)
        if np.isfinite(lim[i]):
            cost[i, m] = (rc[i] - lim[i]) / lam
            index[i, m, 0] = i
    return DecisionModel(cost, index, weight)


def junction_solve_1d(pieces, junctions, lam, grid, running_cost=None, method="howard", policy=None):
    """Discounted solution of the junction problem; returns a :class:`ValueField`."""
    model = build_junction_model(pieces, junctions, lam, grid, running_cost)
    kwargs = {"policy": policy} if method == "howard" and policy is not None else {}
    sol = solve(model, method, **kwargs)
    meta = {"scheme": "upwind-junction-1d", "h": grid.spacing[0], "discount": lam,
            "residual": sol.residual, "iterations": sol.iterations, "method": sol.method,
            "policy": sol.policy}
    return ValueField(grid, sol.values, meta)


def ergodic_constant_1d(pieces, junctions, grid, schedule, anchor=0.0, running_cost=None):
    """Ergodic level of a 1D junction problem by discount extrapolation."""
    anchor_index = grid.nearest_index((anchor,))[0]

    def run(lam, policy):
        field = junction_solve_1d(pieces, junctions, lam, grid, running_cost, policy=policy)
        info = {k: field.meta[k] for k in ("residual", "iterations")}
        return field.values, field.meta["policy"], info

    def wrap(values, meta):
        return ValueField(grid, values, dict(meta, scheme="upwind-junction-1d"))

    return run_schedule(run, schedule, anchor_index, wrap)
