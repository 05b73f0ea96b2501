"""Convex piecewise-linear Hamiltonians of one momentum variable.

A :class:`Hamiltonian1D` is stored in control form,

    H(q) = max_k ( -q * v_k - c_k ),

so that a finite control set restricted to a line of momenta, or the secants
of a sampled convex function, are handled by the same object.  The zero-drift
combination of the pieces (the point of the convex hull with ``v = 0``) is
added on construction; with it the restricted maxima over ``v <= 0`` and
``v >= 0`` are exactly the nondecreasing and nonincreasing envelopes of ``H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLevelSet, NonCoerciveHamiltonian


def zero_drift_level(velocity, cost):
    """Return ``min_q max_k(-q v_k - c_k)``.

    By linear programming duality the minimum equals the best level of a
    convex combination of at most two pieces with zero total velocity.
    Returns ``-inf`` when no such combination exists.
    """
    v = np.asarray(velocity, dtype=float)
    c = np.asarray(cost, dtype=float)
    best = -np.inf
    still = v == 0.0
    if still.any():
        best = float(np.max(-c[still]))
    neg = np.flatnonzero(v < 0.0)
    pos = np.flatnonzero(v > 0.0)
    if neg.size and pos.size:
        vi = v[neg][:, None]
        vj = v[pos][None, :]
        theta = vj / (vj - vi)
        mix = theta * c[neg][:, None] + (1.0 - theta) * c[pos][None, :]
        best = max(best, float(np.max(-mix)))
    return best


@dataclass(frozen=True, eq=False)
class Hamiltonian1D:
    """Convex piecewise-linear ``q -> max_k(-q v_k - c_k)``.

    Parameters
    ----------
    velocity, cost : array_like
        One entry per affine piece.  The slope of piece ``k`` is ``-v_k``.
    """

    velocity: np.ndarray
    cost: np.ndarray
    e0: float = field(init=False)

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.velocity, dtype=float)).copy()
        c = np.atleast_1d(np.asarray(self.cost, dtype=float)).copy()
        if v.shape != c.shape or v.size == 0:
            raise ValueError("velocity and cost must be nonempty and of equal length")
        level = zero_drift_level(v, c)
        if not np.isfinite(level):
            raise NonCoerciveHamiltonian("Hamiltonian is unbounded below (no zero-drift combination)")
        if not np.any(v < 0.0) or not np.any(v > 0.0):
            raise NonCoerciveHamiltonian("Hamiltonian is not coercive in both directions")
        # keep one zero-drift piece at the optimal level
        keep = v != 0.0
        v = np.concatenate([v[keep], [0.0]])
        c = np.concatenate([c[keep], [-level]])
        object.__setattr__(self, "velocity", v)
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "e0", level)

    @classmethod
    def from_samples(cls, q, values):
        """Build from samples of a convex function using its secants.

        Outside the sampled range the result is the linear extension with the
        first and last secant slopes.
        """
        q = np.asarray(q, dtype=float)
        h = np.asarray(values, dtype=float)
        if q.ndim != 1 or q.size < 2 or np.any(np.diff(q) <= 0):
            raise ValueError("q must be strictly increasing with at least two samples")
        slope = np.diff(h) / np.diff(q)
        intercept = h[:-1] - slope * q[:-1]
        return cls(-slope, -intercept)

    # evaluation -------------------------------------------------------

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        vals = -q[..., None] * self.velocity - self.cost
        return vals.max(axis=-1)

    def plus(self, q):
        """Nondecreasing part: pieces with ``v <= 0``."""
        m = self.velocity <= 0.0
        q = np.asarray(q, dtype=float)
        return (-q[..., None] * self.velocity[m] - self.cost[m]).max(axis=-1)

    def minus(self, q):
        """Nonincreasing part: pieces with ``v >= 0``."""
        m = self.velocity >= 0.0
        q = np.asarray(q, dtype=float)
        return (-q[..., None] * self.velocity[m] - self.cost[m]).max(axis=-1)

    def branch(self, name):
        return {"plus": self.plus, "minus": self.minus}[name]

    @property
    def max_speed(self):
        return float(np.max(np.abs(self.velocity)))

    # level sets -------------------------------------------------------

    def argmin_interval(self):
        """Endpoints ``(q_lo, q_hi)`` of the set where ``H`` attains ``e0``."""
        flat = self.velocity == 0.0
        lvl = self.e0
        inc = self.velocity < 0.0
        dec = self.velocity > 0.0
        # on the flat piece H = e0; it leaves the flat piece where an
        # increasing (decreasing) line crosses the level e0
        q_hi = float(np.min(-(lvl + self.cost[inc]) / self.velocity[inc]))
        q_lo = float(np.max(-(lvl + self.cost[dec]) / self.velocity[dec]))
        assert flat.any()
        if q_lo > q_hi:  # rounding in a single-point minimum
            mid = 0.5 * (q_lo + q_hi)
            q_lo = q_hi = mid
        return q_lo, q_hi

    def level_roots(self, level, tol=1e-9):
        """Return ``(q_minus, q_plus)`` with ``H = level`` on each branch.

        For ``level`` within ``tol`` of ``e0`` the whole minimizing interval
        is returned.  Raises :class:`EmptyLevelSet` below ``e0 - tol``.
        """
        if level < self.e0 - tol:
            raise EmptyLevelSet(f"level {level:.6g} is below the minimum {self.e0:.6g}")
        if level <= self.e0 + tol:
            return self.argmin_interval()
        inc = self.velocity < 0.0
        dec = self.velocity > 0.0
        q_plus = float(np.min(-(level + self.cost[inc]) / self.velocity[inc]))
        q_minus = float(np.max(-(level + self.cost[dec]) / self.velocity[dec]))
        return q_minus, q_plus

    def shifted(self, extra_cost):
        """Hamiltonian of the same pieces with every cost raised by ``extra_cost``."""
        return Hamiltonian1D(self.velocity, self.cost + extra_cost)
