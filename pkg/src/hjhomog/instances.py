"""Canonical control sets and benchmark medium pairs."""

from __future__ import annotations

import math

from .controls import ControlSide, FarFieldCost, MediumPair

FIVE_POINT_VELOCITIES = ((0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0))


def five_point(label="R", scale=1.0, cost=1.0):
    """Rest plus the four unit axis directions, all with the same cost."""
    vel = [(scale * fx, scale * fy) for fx, fy in FIVE_POINT_VELOCITIES]
    return ControlSide.from_arrays(label, vel, cost, delta0=abs(scale) / math.sqrt(2.0))


def identical_pair(far_field_cost=None):
    return MediumPair(five_point("L"), five_point("R"), far_field_cost)


def asym_pair(far_field_cost=None):
    """Fast medium on the left (speeds doubled), slow medium on the right."""
    return MediumPair(five_point("L", 2.0), five_point("R"), far_field_cost)


def benchmark_far_field():
    """Saturating cost ``min((|x1| - 1)^+, 2)``."""
    return FarFieldCost(cap=2.0)


def crossing_far_field():
    """Cost ``-min((x1 - 1)^+, 0.5)`` on the right only.

    Unlike the benchmark cost it rewards reaching the right medium, so the
    optimal trajectories from the left cross the interface and the value
    depends on the transmission condition.
    """
    return FarFieldCost(cap=0.5, sign=-1.0, where="right")


FAR_FIELDS = {
    "none": lambda: None,
    "benchmark": benchmark_far_field,
    "crossing": crossing_far_field,
}

INSTANCES = {
    "identical": identical_pair,
    "asym": asym_pair,
}
