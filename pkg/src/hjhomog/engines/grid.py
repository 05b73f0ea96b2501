"""Tensor grids and discrete value fields."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import InvalidArguments, OutOfWindow

WINDOW_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid in one or two dimensions.

    Node ``j`` on axis ``k`` sits at ``origin[k] + j * spacing[k]``.  A
    periodic axis wraps after ``counts[k]`` nodes, so its period is
    ``counts[k] * spacing[k]``.
    """

    origin: tuple
    spacing: tuple
    counts: tuple
    periodic_axis: Optional[int] = None

    def __post_init__(self):
        o = tuple(float(x) for x in np.atleast_1d(self.origin))
        h = tuple(float(x) for x in np.atleast_1d(self.spacing))
        n = tuple(int(x) for x in np.atleast_1d(self.counts))
        if not (len(o) == len(h) == len(n)) or len(o) not in (1, 2):
            raise InvalidArguments("grid must be one or two dimensional with matching origin/spacing/counts")
        if any(x <= 0 for x in h) or any(x < 1 for x in n):
            raise InvalidArguments("grid spacing and counts must be positive")
        if self.periodic_axis is not None and not (0 <= self.periodic_axis < len(o)):
            raise InvalidArguments("periodic_axis out of range")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "spacing", h)
        object.__setattr__(self, "counts", n)

    @classmethod
    def interval(cls, lo, hi, n):
        """Node-centred 1D grid with ``n`` nodes on ``[lo, hi]``."""
        return cls((lo,), ((hi - lo) / (n - 1),), (n,))

    @classmethod
    def periodic_1d(cls, period, n, offset=0.0):
        return cls((offset,), (period / n,), (n,), periodic_axis=0)

    @classmethod
    def strip(cls, lo, hi, n1, period, n2, cell_centred=True):
        """Box ``[lo, hi]`` in x1 times a periodic x2 axis of ``n2`` cells."""
        h2 = period / n2
        o2 = 0.5 * h2 if cell_centred else 0.0
        return cls((lo, o2), ((hi - lo) / (n1 - 1), h2), (n1, n2), periodic_axis=1)

    @property
    def dim(self):
        return len(self.counts)

    @property
    def size(self):
        return int(np.prod(self.counts))

    @property
    def period(self):
        if self.periodic_axis is None:
            return None
        k = self.periodic_axis
        return self.counts[k] * self.spacing[k]

    def axis(self, k):
        return self.origin[k] + self.spacing[k] * np.arange(self.counts[k])

    def mesh(self):
        """Node coordinates, one array of shape ``counts`` per axis."""
        return np.meshgrid(*[self.axis(k) for k in range(self.dim)], indexing="ij")

    def lower(self, k):
        return self.origin[k]

    def upper(self, k):
        return self.origin[k] + self.spacing[k] * (self.counts[k] - 1)

    def nearest_index(self, point):
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = []
        for k in range(self.dim):
            j = int(np.rint((point[k] - self.origin[k]) / self.spacing[k]))
            if k == self.periodic_axis:
                j %= self.counts[k]
            else:
                j = min(max(j, 0), self.counts[k] - 1)
            idx.append(j)
        return tuple(idx)

    def describe(self):
        return {"origin": list(self.origin), "spacing": list(self.spacing),
                "counts": list(self.counts), "periodic_axis": self.periodic_axis}

    def stencil(self, points, tol=WINDOW_TOL):
        """Multilinear interpolation stencil of ``points`` (shape ``(m, dim)``).

        Returns ``(index, weight, inside)`` with flat node indices and weights
        of shape ``(m, 2**dim)``.  ``inside`` flags points within the window
        on every non-periodic axis.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        m = pts.shape[0]
        inside = np.ones(m, dtype=bool)
        lo_idx, frac = [], []
        for k in range(self.dim):
            s = (pts[:, k] - self.origin[k]) / self.spacing[k]
            n = self.counts[k]
            if k == self.periodic_axis:
                i0 = np.floor(s)
                w = s - i0
                i0 = i0.astype(np.int64) % n
                i1 = (i0 + 1) % n
            else:
                inside &= (s >= -tol / self.spacing[k]) & (s <= n - 1 + tol / self.spacing[k])
                s = np.clip(s, 0.0, n - 1)
                if n == 1:
                    i0 = np.zeros(m, dtype=np.int64)
                    i1 = i0
                    w = np.zeros(m)
                else:
                    i0 = np.minimum(np.floor(s).astype(np.int64), n - 2)
                    w = s - i0
                    i1 = i0 + 1
            # snap round-off so that grid-aligned feet use a single node
            w = np.where(np.abs(w) < 1e-12, 0.0, np.where(np.abs(w - 1) < 1e-12, 1.0, w))
            lo_idx.append((i0, i1))
            frac.append(w)
        if self.dim == 1:
            (i0, i1), (w,) = lo_idx[0], frac
            index = np.stack([i0, i1], axis=1)
            weight = np.stack([1 - w, w], axis=1)
        else:
            (a0, a1), (b0, b1) = lo_idx
            wa, wb = frac
            n2 = self.counts[1]
            index = np.stack([a0 * n2 + b0, a0 * n2 + b1, a1 * n2 + b0, a1 * n2 + b1], axis=1)
            weight = np.stack([(1 - wa) * (1 - wb), (1 - wa) * wb, wa * (1 - wb), wa * wb], axis=1)
        return index, weight, inside


@dataclass
class ValueField:
    """Discrete function on a :class:`Grid` plus solver metadata."""

    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.counts)

    def interpolate(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, self.grid.dim)
        index, weight, inside = self.grid.stencil(pts)
        if not inside.all():
            raise OutOfWindow([tuple(p) for p in pts[~inside]])
        return (self.values.ravel()[index] * weight).sum(axis=1)

    def __call__(self, point):
        return float(self.interpolate(np.atleast_1d(point))[0])

    @property
    def sup(self):
        return float(np.max(np.abs(self.values)))

    def lipschitz(self):
        """Largest adjacent difference divided by the spacing, over all axes."""
        best = 0.0
        for k in range(self.grid.dim):
            if self.grid.counts[k] < 2:
                continue
            v = self.values
            if k == self.grid.periodic_axis:
                d = np.roll(v, -1, axis=k) - v
            else:
                d = np.diff(v, axis=k)
            best = max(best, float(np.max(np.abs(d))) / self.grid.spacing[k])
        return best

    def shifted(self, constant):
        return ValueField(self.grid, self.values - constant, dict(self.meta))

    # persistence ------------------------------------------------------

    def write_csv(self, path):
        """Write ``index, coordinates, value`` rows and a JSON sidecar with the metadata."""
        path = Path(path)
        coords = [c.ravel() for c in self.grid.mesh()]
        names = ["x1", "x2"][: self.grid.dim]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", *names, "value"])
            for i, val in enumerate(self.values.ravel()):
                w.writerow([i, *(f"{c[i]:.17g}" for c in coords), f"{val:.17g}"])
        meta = {k: v for k, v in self.meta.items() if k != "policy"}
        sidecar = {"grid": self.grid.describe(), "meta": _jsonable(meta)}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
        return path

    @classmethod
    def read_csv(cls, path):
        path = Path(path)
        side = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        g = side["grid"]
        grid = Grid(tuple(g["origin"]), tuple(g["spacing"]), tuple(g["counts"]), g["periodic_axis"])
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(grid, data[:, -1], side["meta"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj
