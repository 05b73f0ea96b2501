"""Ergodic constants from a schedule of vanishing discounts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ExtrapolationUnstable, InvalidArguments
from .grid import ValueField

DEFAULT_SCHEDULE = (0.02, 0.01, 0.005)
EXTRAPOLATION_TOL = 5e-3
# absolute floor below which level gaps count as solver noise
GAP_FLOOR = 1e-6


@dataclass
class ErgodicResult:
    """Extrapolated ergodic level and the normalised corrector.

    ``constant`` is the level ``E`` for which ``H(Du + p) = E`` has a
    corrector, i.e. minus the extrapolated limit of ``lambda * V_lambda``.
    """

    constant: float
    corrector: ValueField
    schedule: list
    levels: list
    extrapolants: list
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def neville_at_zero(x, y):
    """Values at 0 of the interpolating polynomials through the first 1, 2, ... points.

    ``y`` may carry trailing axes; each is extrapolated independently and the
    entries of the returned list then have the trailing shape.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    scalar = y.ndim == 1
    prev = y.copy()
    out = [prev[0]]
    for j in range(1, n):
        cur = np.stack([(x[i + j] * prev[i] - x[i] * prev[i + 1]) / (x[i + j] - x[i])
                        for i in range(n - j)])
        out.append(cur[0])
        prev = cur
    return [float(v) for v in out] if scalar else out


def check_schedule(schedule):
    sched = [float(s) for s in schedule]
    if len(sched) < 2:
        raise InvalidArguments("discount schedule needs at least two entries")
    if any(s <= 0 for s in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
        raise InvalidArguments("discount schedule must be positive and strictly decreasing")
    return sched


def run_schedule(solve, schedule, anchor_index, make_field, tol=EXTRAPOLATION_TOL):
    """Drive ``solve(lam, policy) -> (values, policy, info)`` along ``schedule``.

    ``make_field(values, meta)`` wraps the anchored corrector.  The policy of
    each solve warm-starts the next one.
    """
    sched = check_schedule(schedule)
    levels, infos = [], []
    policy = None
    anchored = []
    for lam in sched:
        values, policy, info = solve(lam, policy)
        levels.append(-lam * float(values.flat[anchor_index]))
        anchored.append(np.asarray(values, dtype=float).ravel() - values.flat[anchor_index])
        infos.append(info)
        if len(levels) >= 3:
            g_prev = abs(levels[-2] - levels[-3])
            g_last = abs(levels[-1] - levels[-2])
            if g_last > 10.0 * g_prev + GAP_FLOOR:
                raise ExtrapolationUnstable(
                    f"level gap grew from {g_prev:.3g} to {g_last:.3g} at discount {lam:g}")
    extrap = neville_at_zero(sched, levels)
    increment = abs(extrap[-1] - extrap[-2])
    meta = {
        "discount": sched[-1],
        "schedule": sched,
        "levels": levels,
        "extrapolants": extrap,
        "solves": infos,
    }
    corrector = make_field(neville_at_zero(sched, np.stack(anchored))[-1], meta)
    return ErgodicResult(
        constant=extrap[-1],
        corrector=corrector,
        schedule=sched,
        levels=levels,
        extrapolants=extrap,
        converged=increment < tol,
        diagnostics={"last_gap": abs(levels[-1] - levels[-2]), "extrapolation_increment": increment,
                     "corrector_increment": float(np.max(np.abs(anchored[-1] - anchored[-2]))),
                     "anchor_index": int(anchor_index)},
    )
