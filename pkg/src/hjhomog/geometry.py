"""Oscillatory interface between the two media and its rescaled finger zoom.

The interface is the graph of a multivalued function of ``x2``.  With
``t = frac(x2 / (eta*eps))`` the point belongs to the right medium when
``x1 > eta*G(t) + eta*eps*g(t)``, where ``G = +1`` on ``(a, b)`` and ``-1``
elsewhere.  At ``t = a`` and ``t = b`` the threshold jumps and the interface
contains a vertical cap.  Region codes are small integers so that whole grids
can be classified at once.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArguments, UndefinedNormal

SNAP_TOL = 1e-14
# tolerance on the fractional phase t for landing exactly on a cap
PHASE_TOL = 1e-12


class Region(enum.IntEnum):
    LEFT = -1
    ON = 0
    RIGHT = 1
    OUTSIDE = 2


@dataclass(frozen=True, eq=False)
class ToothProfile:
    """Periodic tooth shape ``g`` with zeros at ``a`` and ``b``.

    Build with :meth:`sine` or :meth:`from_samples` rather than directly.
    """

    a: float
    b: float
    kind: str
    params: tuple
    shift: float = 0.0
    sign: float = 1.0
    origin: float = None
    max_abs: float = field(init=False)

    def __post_init__(self):
        if self.origin is None:
            object.__setattr__(self, "origin", self.a)
        if not (0.0 < self.a < self.b < 1.0):
            raise InvalidArguments(f"profile needs 0 < a < b < 1, got a={self.a}, b={self.b}")
        if self.kind not in ("sine", "samples"):
            raise InvalidArguments(f"unknown profile kind {self.kind!r}")
        for t in (self.a, self.b):
            if abs(float(self.g(t))) > 1e-9:
                raise InvalidArguments(f"profile must vanish at a and b; g({t}) = {float(self.g(t)):.3g}")
        dense = self.g(np.linspace(0.0, 1.0, 4097))
        object.__setattr__(self, "max_abs", float(np.max(np.abs(dense))))

    @classmethod
    def sine(cls, a=0.25, b=0.75, h=0.25):
        """``g(t) = h sin(2 pi (t - a))``; vanishes at ``b`` only when ``b - a = 1/2``."""
        return cls(float(a), float(b), "sine", (float(h),))

    @classmethod
    def from_samples(cls, a, b, samples):
        """Piecewise-linear periodic interpolation of ``N`` uniform samples over one period."""
        samples = tuple(float(s) for s in samples)
        if len(samples) < 2:
            raise InvalidArguments("sampled profile needs at least two samples")
        return cls(float(a), float(b), "samples", samples)

    # raw shape before the mirror transform
    def _raw(self, t):
        t = np.mod(t, 1.0)
        if self.kind == "sine":
            (h,) = self.params
            return h * np.sin(2 * np.pi * (t - self.origin))
        s = np.asarray(self.params)
        n = s.size
        x = t * n
        i = np.floor(x).astype(int) % n
        w = x - np.floor(x)
        return (1 - w) * s[i] + w * s[(i + 1) % n]

    def _raw_slope(self, t):
        t = np.mod(t, 1.0)
        if self.kind == "sine":
            (h,) = self.params
            return 2 * np.pi * h * np.cos(2 * np.pi * (t - self.origin))
        s = np.asarray(self.params)
        n = s.size
        i = np.floor(t * n).astype(int) % n
        return (s[(i + 1) % n] - s[i]) * n

    def g(self, t):
        t = np.asarray(t, dtype=float)
        return self.sign * self._raw(t + self.shift)

    def slope(self, t):
        t = np.asarray(t, dtype=float)
        return self.sign * self._raw_slope(t + self.shift)

    @property
    def left_fraction(self):
        return self.b - self.a

    def mirrored(self):
        """Profile of the interface seen through ``x1 -> -x1``.

        The mirror image is again a graph over the complement teeth; shifting
        the phase by ``b - a'`` puts the new teeth on ``(a', b')`` with
        ``a' = (b - a)/2`` and ``b' = a' + 1 - (b - a)``.
        """
        a2 = 0.5 * (self.b - self.a)
        b2 = a2 + 1.0 - (self.b - self.a)
        return ToothProfile(a2, b2, self.kind, self.params, self.shift + self.b - a2,
                            -self.sign, self.origin)

    def describe(self):
        if self.kind == "sine":
            return {"kind": "sine", "a": self.a, "b": self.b, "h": self.params[0]}
        return {"kind": "samples", "a": self.a, "b": self.b, "samples": list(self.params)}


def _phase(x2, period):
    t = np.mod(np.asarray(x2, dtype=float) / period, 1.0)
    return np.where(t >= 1.0, 0.0, t)


def _on_cap(t, profile):
    at_a = np.abs(t - profile.a) <= PHASE_TOL
    at_b = np.abs(t - profile.b) <= PHASE_TOL
    return at_a, at_b


def _compare(x1, threshold):
    diff = x1 - threshold
    out = np.where(diff > 0, Region.RIGHT, Region.LEFT).astype(np.int8)
    out[np.abs(diff) <= SNAP_TOL] = Region.ON
    return out


@dataclass(frozen=True)
class InterfaceSpec:
    """Interface of amplitude ``eta`` and tooth period ``eta * eps``."""

    profile: ToothProfile
    eta: float
    eps: float

    def __post_init__(self):
        if not (self.eta > 0 and self.eps > 0):
            raise InvalidArguments("eta and eps must be positive")

    @property
    def period(self):
        return self.eta * self.eps

    def classify(self, x1, x2):
        """Region codes for arrays of coordinates."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        t = _phase(x2, self.period)
        pr = self.profile
        osc = self.eta * self.eps * pr.g(t)
        inside = (t > pr.a) & (t < pr.b)
        threshold = np.where(inside, self.eta, -self.eta) + osc
        out = _compare(x1, threshold)
        at_a, at_b = _on_cap(t, pr)
        cap = at_a | at_b
        if cap.any():
            lo = -self.eta + osc - SNAP_TOL
            hi = self.eta + osc + SNAP_TOL
            capcode = np.where(x1 < lo, Region.LEFT, np.where(x1 > hi, Region.RIGHT, Region.ON))
            out = np.where(cap, capcode, out).astype(np.int8)
        return out

    def max_extent(self):
        """Largest ``|x1|`` reached by the interface."""
        return self.eta * (1.0 + self.eps * self.profile.max_abs)


@dataclass(frozen=True)
class FingerGeometry:
    """Zoomed interface: left fingers of period ``eta`` inside a right medium."""

    profile: ToothProfile
    eta: float
    rho: float = np.inf

    def __post_init__(self):
        if self.eta <= 0 or self.rho <= 0:
            raise InvalidArguments("eta and rho must be positive")
        if np.isfinite(self.rho) and self.eta * self.profile.max_abs >= self.rho:
            raise InvalidArguments("finger tips must lie strictly inside the truncation |y1| < rho")

    @property
    def period(self):
        return self.eta

    def classify(self, y1, y2):
        y1, y2 = np.broadcast_arrays(np.asarray(y1, float), np.asarray(y2, float))
        t = _phase(y2, self.eta)
        pr = self.profile
        tip = self.eta * pr.g(t)
        inside = (t > pr.a) & (t < pr.b)
        out = np.full(y1.shape, Region.RIGHT, dtype=np.int8)
        out = np.where(inside, _compare(y1, tip), out).astype(np.int8)
        at_a, at_b = _on_cap(t, pr)
        cap = at_a | at_b
        out = np.where(cap & (y1 <= tip + SNAP_TOL), Region.ON, out).astype(np.int8)
        out[np.abs(y1) > self.rho] = Region.OUTSIDE
        return out

    def mirrored(self):
        return FingerGeometry(self.profile.mirrored(), self.eta, self.rho)

    def with_rho(self, rho):
        return FingerGeometry(self.profile, self.eta, rho)


def region_of(spec, x):
    """Region of a single point for an :class:`InterfaceSpec`."""
    return Region(int(spec.classify(x[0], x[1])))


def finger_region_of(fg, y):
    return Region(int(fg.classify(y[0], y[1])))


def normal(geom, x, tol=1e-9):
    """Unit normal at an interface point, oriented from left to right.

    Raises :class:`UndefinedNormal` at corners where a cap meets a graph.
    """
    pr = geom.profile
    if isinstance(geom, InterfaceSpec):
        period, amp, osc_scale = geom.period, geom.eta, geom.eta * geom.eps
    else:
        period, amp, osc_scale = geom.eta, None, geom.eta
    t = float(_phase(x[1], period))
    at_a = abs(t - pr.a) <= PHASE_TOL
    at_b = abs(t - pr.b) <= PHASE_TOL
    if at_a or at_b:
        tip = osc_scale * float(pr.g(t))
        ends = [tip] if amp is None else [tip - amp, tip + amp]
        if any(abs(x[0] - e) <= tol for e in ends):
            raise UndefinedNormal(f"corner of the interface at {tuple(x)}")
        return np.array([0.0, -1.0]) if at_a else np.array([0.0, 1.0])
    # graph point: d/dx2 of the threshold is eps*g'(t)/eps = g'(t) in both geometries
    s = float(pr.slope(t))
    return np.array([1.0, -s]) / np.sqrt(1.0 + s * s)
