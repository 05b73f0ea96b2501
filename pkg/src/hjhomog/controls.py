"""Finite control sets for the two media and the Hamiltonians they generate.

Every Hamiltonian here is a maximum of affine functions of the momentum
taken over a finite list of ``(velocity, cost)`` pairs.  Because the
objective is linear in ``(f, l)`` the maximum over the list equals the
maximum over its convex hull.  Restricted maxima (controls pointing to one
side of a direction ``n``) are not hull-exact on the raw list, so they also
scan the pairwise convex combinations whose velocity is tangent to ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .convex1d import Hamiltonian1D, zero_drift_level
from .errors import (
    AssumptionViolation,
    ConfigError,
    FeasibilityError,
    InvalidArguments,
)


@dataclass(frozen=True)
class Control:
    velocity: tuple
    cost: float

    def __post_init__(self):
        v = tuple(float(x) for x in self.velocity)
        if len(v) != 2:
            raise InvalidArguments("a control velocity must have two components")
        object.__setattr__(self, "velocity", v)
        object.__setattr__(self, "cost", float(self.cost))


@dataclass(frozen=True, eq=False)
class ControlSide:
    """Finite control set of one medium.

    Attributes
    ----------
    label : str
        ``"L"`` or ``"R"``.
    controls : tuple of Control
    delta0 : float
        Declared controllability radius; verified by :func:`check_assumptions`.
    """

    label: str
    controls: tuple
    delta0: float = 0.0
    velocities: np.ndarray = field(init=False, repr=False)
    costs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.label not in ("L", "R"):
            raise InvalidArguments(f"side label must be 'L' or 'R', got {self.label!r}")
        ctrls = tuple(c if isinstance(c, Control) else Control(*c) for c in self.controls)
        object.__setattr__(self, "controls", ctrls)
        if ctrls:
            vel = np.array([c.velocity for c in ctrls], dtype=float)
            cost = np.array([c.cost for c in ctrls], dtype=float)
        else:
            vel = np.zeros((0, 2))
            cost = np.zeros(0)
        vel.flags.writeable = False
        cost.flags.writeable = False
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "costs", cost)

    @classmethod
    def from_arrays(cls, label, velocities, costs, delta0=0.0):
        velocities = np.asarray(velocities, dtype=float).reshape(-1, 2)
        costs = np.broadcast_to(np.asarray(costs, dtype=float), (velocities.shape[0],))
        return cls(label, tuple(Control(tuple(v), c) for v, c in zip(velocities, costs)), delta0)

    @property
    def speed_bound(self):
        """``M_f``: the largest control speed."""
        return float(np.max(np.linalg.norm(self.velocities, axis=1))) if len(self.controls) else 0.0

    @property
    def cost_bound(self):
        """``M_l``: the largest absolute running cost."""
        return float(np.max(np.abs(self.costs))) if len(self.controls) else 0.0

    def scaled(self, factor, label=None):
        """Same costs, velocities multiplied by ``factor``."""
        return ControlSide.from_arrays(label or self.label, self.velocities * factor, self.costs,
                                       self.delta0 * abs(factor))

    def relabeled(self, label):
        return ControlSide(label, self.controls, self.delta0)

    def reflected(self, label=None):
        """Mirror image under ``x1 -> -x1`` (first velocity component negated)."""
        vel = self.velocities * np.array([-1.0, 1.0])
        return ControlSide.from_arrays(label or self.label, vel, self.costs, self.delta0)

    def restrict_to_line(self, p2, axis=1):
        """1D Hamiltonian ``q -> H(q e_axis + p2 e_other)``.

        Each control becomes a piece with velocity ``f_axis`` and cost
        ``l + p2 * f_other``.
        """
        if axis not in (1, 2):
            raise InvalidArguments("axis must be 1 or 2")
        along = self.velocities[:, axis - 1]
        across = self.velocities[:, 2 - axis]
        return Hamiltonian1D(along, self.costs + p2 * across)


@dataclass(frozen=True)
class FarFieldCost:
    """Additive running cost depending on ``x1`` only, zero on ``|x1| < 1``.

    ``c(x1) = sign * min((|x1| - 1)^+, cap)``, restricted to ``x1 > 0``,
    ``x1 < 0`` or both according to ``where``.
    """

    cap: float = 2.0
    sign: float = 1.0
    where: str = "both"

    def __post_init__(self):
        if self.cap < 0:
            raise InvalidArguments("far-field cap must be nonnegative")
        if self.where not in ("both", "left", "right"):
            raise InvalidArguments("where must be 'both', 'left' or 'right'")

    def __call__(self, x1):
        x1 = np.asarray(x1, dtype=float)
        val = self.sign * np.minimum(np.maximum(np.abs(x1) - 1.0, 0.0), self.cap)
        if self.where == "left":
            val = np.where(x1 < 0, val, 0.0)
        elif self.where == "right":
            val = np.where(x1 > 0, val, 0.0)
        return val

    @property
    def bound(self):
        return abs(self.sign) * self.cap


@dataclass(frozen=True)
class MediumPair:
    left: ControlSide
    right: ControlSide
    far_field_cost: Optional[FarFieldCost] = None

    def __post_init__(self):
        if self.left.label != "L" or self.right.label != "R":
            raise InvalidArguments("MediumPair expects a left side labelled 'L' and a right side labelled 'R'")

    @property
    def speed_bound(self):
        return max(self.left.speed_bound, self.right.speed_bound)

    @property
    def cost_bound(self):
        return max(self.left.cost_bound, self.right.cost_bound)

    @property
    def far_field_bound(self):
        return self.far_field_cost.bound if self.far_field_cost is not None else 0.0

    def side(self, label):
        return self.left if label == "L" else self.right

    def with_far_field(self, cost):
        return MediumPair(self.left, self.right, cost)

    def mirrored(self):
        """Pair seen through ``x1 -> -x1``: the right medium becomes the left one."""
        ff = self.far_field_cost
        if ff is not None and ff.where != "both":
            ff = FarFieldCost(ff.cap, ff.sign, "left" if ff.where == "right" else "right")
        return MediumPair(self.right.reflected("L"), self.left.reflected("R"), ff)


# Hamiltonians --------------------------------------------------------------

def _affine_terms(velocities, costs, p):
    """``-p.f - l`` for every control, broadcast over leading axes of ``p``."""
    p = np.asarray(p, dtype=float)
    return -(p[..., None, :] * velocities).sum(axis=-1) - costs


def hamiltonian(side, p):
    """``max_a (-p.f(a) - l(a))``; vectorised over the leading axes of ``p``."""
    if not len(side.controls):
        raise FeasibilityError("empty control set")
    out = _affine_terms(side.velocities, side.costs, p).max(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _tangent_combinations(velocities, costs, normal):
    """Pairwise convex combinations whose velocity is orthogonal to ``normal``."""
    d = velocities @ normal
    neg = np.flatnonzero(d < 0)
    pos = np.flatnonzero(d > 0)
    if not (neg.size and pos.size):
        return np.zeros((0, 2)), np.zeros(0)
    i, j = np.meshgrid(neg, pos, indexing="ij")
    i, j = i.ravel(), j.ravel()
    theta = d[j] / (d[j] - d[i])
    vel = theta[:, None] * velocities[i] + (1 - theta)[:, None] * velocities[j]
    cost = theta * costs[i] + (1 - theta) * costs[j]
    return vel, cost


def _restricted(side, normal, keep_sign):
    """Hull points of ``side`` with ``keep_sign * f.normal >= 0``."""
    normal = np.asarray(normal, dtype=float)
    d = side.velocities @ normal
    mask = keep_sign * d >= 0
    tv, tc = _tangent_combinations(side.velocities, side.costs, normal)
    vel = np.concatenate([side.velocities[mask], tv])
    cost = np.concatenate([side.costs[mask], tc])
    if vel.shape[0] == 0:
        raise FeasibilityError(f"no control of side {side.label} satisfies the direction constraint")
    return vel, cost


def directional_half_hamiltonian(side, p, normal, branch):
    """Half-Hamiltonian along an arbitrary direction ``normal``.

    ``branch="minus"`` keeps controls with ``f.n >= 0``; ``"plus"`` keeps
    ``f.n <= 0``.
    """
    if branch not in ("plus", "minus"):
        raise InvalidArguments("branch must be 'plus' or 'minus'")
    vel, cost = _restricted(side, normal, 1.0 if branch == "minus" else -1.0)
    out = _affine_terms(vel, cost, p).max(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def half_hamiltonian(side, p, axis, branch):
    """Monotone part of :func:`hamiltonian` in the coordinate ``p_axis``.

    ``minus`` is nonincreasing and ``plus`` nondecreasing in ``p_axis``;
    their maximum is the full Hamiltonian.
    """
    if axis not in (1, 2):
        raise InvalidArguments("axis must be 1 or 2")
    normal = np.zeros(2)
    normal[axis - 1] = 1.0
    return directional_half_hamiltonian(side, p, normal, branch)


def interface_hamiltonian(pair, p_left, p_right, normal):
    """Transmission Hamiltonian across an interface with normal ``normal``.

    Left controls may only point backwards (``f.n <= 0``) and right controls
    only forwards (``f.n >= 0``).
    """
    p_left = np.asarray(p_left, dtype=float)
    p_right = np.asarray(p_right, dtype=float)
    normal = np.asarray(normal, dtype=float)
    if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
        raise InvalidArguments("normal must be a unit vector")
    jump = p_left - p_right
    cross = jump[0] * normal[1] - jump[1] * normal[0]
    if abs(cross) > 1e-12 * (np.linalg.norm(p_left) + np.linalg.norm(p_right) + 1.0):
        raise InvalidArguments("p_left - p_right must be colinear to the normal")
    return max(directional_half_hamiltonian(pair.left, p_left, normal, "plus"),
               directional_half_hamiltonian(pair.right, p_right, normal, "minus"))


def e0(side, p2):
    """``min_q H(q e1 + p2 e2)`` for a control side or a tabulated Hamiltonian."""
    if isinstance(side, ControlSide):
        return zero_drift_level(side.velocities[:, 0], side.costs + p2 * side.velocities[:, 1])
    return side.e0(p2)


def e0_interval(side, p2):
    """Endpoints of the minimizing set of ``q -> H(q e1 + p2 e2)``."""
    if isinstance(side, ControlSide):
        return side.restrict_to_line(p2).argmin_interval()
    return side.e0_interval(p2)


def e0_pair(a, b, p2):
    return max(e0(a, p2), e0(b, p2))


# Standing assumptions -------------------------------------------------------

@dataclass
class AssumptionReport:
    speed_bound: float
    cost_bound: float
    origin_radius: dict
    chebyshev_radius: dict
    flags: dict
    messages: list

    @property
    def passed(self):
        return all(self.flags.values())

    @property
    def delta0(self):
        """Certified radius of a ball about the origin inside both velocity hulls."""
        return min(self.origin_radius.values()) if self.origin_radius else 0.0


def _hull_facets(points):
    try:
        hull = ConvexHull(points)
    except (QhullError, ValueError):
        return None
    a = hull.equations[:, :2]
    b = -hull.equations[:, 2]  # a.x <= b on the hull, with |a| = 1
    return a, b


def _radii(points):
    """(radius about the origin, Chebyshev radius) of the hull of ``points``."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if pts.shape[0] < 3:
        return 0.0, 0.0
    facets = _hull_facets(pts)
    if facets is None:
        return 0.0, 0.0
    a, b = facets
    origin = max(0.0, float(np.min(b)))
    # max r s.t. a.c + r|a| <= b, solved as an LP in (c1, c2, r)
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=np.hstack([a, np.linalg.norm(a, axis=1)[:, None]]),
                  b_ub=b, bounds=[(None, None), (None, None), (0, None)], method="highs")
    cheb = float(res.x[2]) if res.success else 0.0
    return origin, cheb


def check_assumptions(pair, raise_on_failure=True):
    """Check nonemptiness, bounded data, and controllability of both sides.

    Returns an :class:`AssumptionReport`; raises :class:`AssumptionViolation`
    listing the failed clauses unless ``raise_on_failure`` is false.
    """
    flags = {"H0": True, "H1": True, "H2": True, "H3": True}
    messages = []
    origin, cheb = {}, {}
    for side in (pair.left, pair.right):
        if not len(side.controls):
            flags["H0"] = False
            messages.append(f"side {side.label} has no controls")
            origin[side.label] = cheb[side.label] = 0.0
            continue
        if not (np.all(np.isfinite(side.velocities)) and np.all(np.isfinite(side.costs))):
            flags["H1"] = False
            messages.append(f"side {side.label} has non-finite data")
            origin[side.label] = cheb[side.label] = 0.0
            continue
        r0, rc = _radii(side.velocities)
        origin[side.label], cheb[side.label] = r0, rc
        if r0 <= 0.0:
            flags["H3"] = False
            messages.append(f"velocity hull of side {side.label} does not contain a ball about 0")
        elif side.delta0 > r0 + 1e-12:
            flags["H3"] = False
            messages.append(f"declared delta0={side.delta0} of side {side.label} exceeds certified {r0:.6g}")
    if pair.far_field_cost is not None and not math.isfinite(pair.far_field_bound):
        flags["H1"] = False
        messages.append("far-field cost is unbounded")
    report = AssumptionReport(
        speed_bound=pair.speed_bound if flags["H0"] else 0.0,
        cost_bound=pair.cost_bound if flags["H0"] else 0.0,
        origin_radius=origin,
        chebyshev_radius=cheb,
        flags=flags,
        messages=messages,
    )
    if raise_on_failure and not report.passed:
        raise AssumptionViolation([k for k, v in flags.items() if not v], report)
    return report


# File format -------------------------------------------------------------------

def load_medium_file(path, far_field_cost=None):
    """Read a medium file with ``[left]`` / ``[right]`` sections of ``fx fy cost`` lines."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"medium file not found: {path}")
    records = {"left": [], "right": []}
    current = None
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            name = line.strip("[]").strip().lower()
            if name not in records:
                raise ConfigError(f"{path}:{lineno}: unknown section [{name}]")
            current = name
            continue
        if current is None:
            raise ConfigError(f"{path}:{lineno}: control record before any [left]/[right] header")
        parts = line.split()
        if len(parts) != 3:
            raise ConfigError(f"{path}:{lineno}: expected 'fx fy cost', got {line!r}")
        try:
            fx, fy, cost = map(float, parts)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
        records[current].append(Control((fx, fy), cost))
    left = ControlSide("L", tuple(records["left"]))
    right = ControlSide("R", tuple(records["right"]))
    return MediumPair(left, right, far_field_cost)


def format_medium(pair):
    """Inverse of :func:`load_medium_file`."""
    lines = []
    for name, side in (("left", pair.left), ("right", pair.right)):
        lines.append(f"[{name}]")
        lines.extend(f"{c.velocity[0]:.17g} {c.velocity[1]:.17g} {c.cost:.17g}" for c in side.controls)
    return "\n".join(lines) + "\n"
