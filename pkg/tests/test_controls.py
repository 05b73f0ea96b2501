import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from hjhomog.controls import (
    ControlSide,
    FarFieldCost,
    MediumPair,
    check_assumptions,
    directional_half_hamiltonian,
    e0,
    e0_interval,
    e0_pair,
    format_medium,
    half_hamiltonian,
    hamiltonian,
    interface_hamiltonian,
    load_medium_file,
)
from hjhomog.errors import AssumptionViolation, ConfigError, InvalidArguments
from hjhomog.instances import asym_pair, five_point, identical_pair

C5 = five_point()
C5_DOUBLED = five_point("R", 2.0)


# exact values -----------------------------------------------------------------

@pytest.mark.parametrize("p, expected", [((0.0, 0.0), -1.0), ((2.0, 0.5), 1.0), ((0.0, -3.0), 2.0)])
def test_hamiltonian_five_point(p, expected):
    assert hamiltonian(C5, p) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("p, axis, branch, expected", [
    ((2.0, 0.0), 1, "minus", -1.0),
    ((2.0, 0.0), 1, "plus", 1.0),
    ((0.0, 0.0), 2, "plus", -1.0),
])
def test_half_hamiltonian_examples(p, axis, branch, expected):
    assert half_hamiltonian(C5, p, axis, branch) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("p_left, p_right, expected", [
    ((0.0, 0.0), (0.0, 0.0), -1.0),
    ((-2.0, 0.0), (-2.0, 0.0), 1.0),
    ((3.0, 1.0), (0.0, 1.0), 2.0),
])
def test_interface_hamiltonian_examples(p_left, p_right, expected):
    pair = identical_pair()
    assert interface_hamiltonian(pair, p_left, p_right, (1.0, 0.0)) == pytest.approx(expected, abs=1e-15)


def test_interface_hamiltonian_rejects_tangential_jump():
    with pytest.raises(InvalidArguments):
        interface_hamiltonian(identical_pair(), (0.0, 1.0), (0.0, 0.0), (1.0, 0.0))
    with pytest.raises(InvalidArguments):
        interface_hamiltonian(identical_pair(), (0.0, 0.0), (0.0, 0.0), (2.0, 0.0))


@pytest.mark.parametrize("side, p2, expected", [(C5, 0.0, -1.0), (C5, 0.5, -0.5), (C5_DOUBLED, 0.5, 0.0)])
def test_e0_examples(side, p2, expected):
    assert e0(side, p2) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("a, b, p2, expected", [(C5, C5, 0.5, -0.5), (C5, C5_DOUBLED, 0.5, 0.0),
                                                (C5, C5, 0.0, -1.0)])
def test_e0_pair_examples(a, b, p2, expected):
    assert e0_pair(a, b, p2) == pytest.approx(expected, abs=1e-15)


def test_e0_interval_five_point():
    # H(q, 0.5) = max(|q|, 0.5) - 1 is flat on [-0.5, 0.5]
    lo, hi = e0_interval(C5, 0.5)
    assert (lo, hi) == pytest.approx((-0.5, 0.5), abs=1e-12)
    assert e0_interval(C5, 0.0) == pytest.approx((0.0, 0.0), abs=1e-12)


def _bisect_argmin_endpoints(side, p2, tol=1e-11):
    """Independent oracle: locate a minimiser, then bisect the sublevel set outwards."""
    level = e0(side, p2)

    def below(q):
        return hamiltonian(side, (q, p2)) <= level + 1e-7

    inner = minimize_scalar(lambda q: hamiltonian(side, (q, p2)), bounds=(-50.0, 50.0),
                            method="bounded", options={"xatol": 1e-12}).x
    assert below(inner)

    def edge(outside, inside):
        while abs(inside - outside) > tol:
            mid = 0.5 * (inside + outside)
            if below(mid):
                inside = mid
            else:
                outside = mid
        return inside

    return edge(-50.0, inner), edge(50.0, inner)


@pytest.mark.parametrize("p2", [-1.3, -0.5, 0.0, 0.25, 0.8])
def test_e0_interval_matches_bisection(p2):
    side = ControlSide.from_arrays("L", [(0, 0), (1.0, 0.3), (-2.0, 0.1), (0.2, 1.5), (0.1, -1.0)],
                                   [1.0, 0.5, 2.0, 0.2, 1.2])
    lo, hi = e0_interval(side, p2)
    ref = _bisect_argmin_endpoints(side, p2)
    assert lo == pytest.approx(ref[0], abs=1e-6)
    assert hi == pytest.approx(ref[1], abs=1e-6)


# assumptions ------------------------------------------------------------------

def test_check_assumptions_five_point():
    rep = check_assumptions(identical_pair())
    assert rep.passed
    assert rep.delta0 == pytest.approx(1 / math.sqrt(2.0), abs=1e-12)
    assert rep.speed_bound == 1.0 and rep.cost_bound == 1.0
    assert rep.chebyshev_radius["L"] == pytest.approx(1 / math.sqrt(2.0), abs=1e-9)


def test_check_assumptions_single_control_fails_controllability():
    pair = MediumPair(ControlSide.from_arrays("L", [(1.0, 0.0)], [1.0]), C5)
    with pytest.raises(AssumptionViolation) as info:
        check_assumptions(pair)
    assert info.value.failed == ["H3"]


def test_check_assumptions_empty_side_fails_nonemptiness():
    rep = check_assumptions(MediumPair(ControlSide("L", ()), C5), raise_on_failure=False)
    assert not rep.passed and not rep.flags["H0"]


def test_asym_radius_is_the_smaller_side():
    rep = check_assumptions(asym_pair())
    assert rep.origin_radius["L"] == pytest.approx(math.sqrt(2.0))
    assert rep.delta0 == pytest.approx(1 / math.sqrt(2.0))


# far field and files ------------------------------------------------------------

def test_far_field_cost_shape():
    c = FarFieldCost(cap=2.0)
    x = np.array([-5.0, -2.0, -1.0, 0.0, 0.5, 1.0, 1.5, 3.0, 10.0])
    np.testing.assert_allclose(c(x), [2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.5, 2.0, 2.0])
    right = FarFieldCost(cap=0.5, sign=-1.0, where="right")
    np.testing.assert_allclose(right(x), [0, 0, 0, 0, 0, 0, -0.5, -0.5, -0.5])
    assert right.bound == 0.5


def test_medium_file_round_trip(tmp_path):
    pair = asym_pair()
    path = tmp_path / "m.medium"
    path.write_text(format_medium(pair))
    back = load_medium_file(path)
    np.testing.assert_array_equal(back.left.velocities, pair.left.velocities)
    np.testing.assert_array_equal(back.right.costs, pair.right.costs)


@pytest.mark.parametrize("text", ["0 0 1\n", "[left]\n0 0\n", "[middle]\n0 0 1\n", "[left]\n0 x 1\n"])
def test_medium_file_errors(tmp_path, text):
    path = tmp_path / "bad.medium"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_medium_file(path)


def test_missing_medium_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_medium_file(tmp_path / "absent.medium")


def test_mirrored_pair_swaps_and_reflects():
    pair = asym_pair()
    m = pair.mirrored()
    p = np.array([0.7, -0.4])
    # H of the mirrored right side at p equals H of the original left side at (-p1, p2)
    assert hamiltonian(m.right, p) == pytest.approx(hamiltonian(pair.left, p * [-1, 1]))
    assert hamiltonian(m.left, p) == pytest.approx(hamiltonian(pair.right, p * [-1, 1]))


# properties --------------------------------------------------------------------

coords = st.floats(-5.0, 5.0, allow_nan=False)
momenta = st.tuples(coords, coords)


@st.composite
def control_sides(draw):
    """Random sides whose hull contains a diamond about the origin."""
    r = draw(st.floats(0.3, 2.0))
    extra = draw(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), max_size=5))
    vel = [(r, 0.0), (-r, 0.0), (0.0, r), (0.0, -r), *extra]
    costs = draw(st.lists(st.floats(-1.0, 2.0), min_size=len(vel), max_size=len(vel)))
    return ControlSide.from_arrays("L", vel, costs)


@settings(max_examples=60, deadline=None)
@given(control_sides(), momenta, momenta, st.floats(0.0, 1.0))
def test_hamiltonian_is_convex(side, p, q, t):
    p, q = np.array(p), np.array(q)
    mid = hamiltonian(side, t * p + (1 - t) * q)
    assert mid <= t * hamiltonian(side, p) + (1 - t) * hamiltonian(side, q) + 1e-9


@settings(max_examples=60, deadline=None)
@given(control_sides(), momenta)
def test_hamiltonian_growth_bounds(side, p):
    pair = MediumPair(side, side.relabeled("R"))
    rep = check_assumptions(pair)
    norm = float(np.hypot(*p))
    val = hamiltonian(side, p)
    assert val >= rep.delta0 * norm - side.cost_bound - 1e-9
    assert val <= side.speed_bound * norm + side.cost_bound + 1e-9


@settings(max_examples=60, deadline=None)
@given(control_sides(), momenta, st.sampled_from([1, 2]))
def test_envelope_identity(side, p, axis):
    full = hamiltonian(side, p)
    both = max(half_hamiltonian(side, p, axis, "plus"), half_hamiltonian(side, p, axis, "minus"))
    assert both == pytest.approx(full, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(control_sides(), coords)
def test_branches_are_monotone(side, p2):
    qs = np.linspace(-6, 6, 121)
    plus = [half_hamiltonian(side, (q, p2), 1, "plus") for q in qs]
    minus = [half_hamiltonian(side, (q, p2), 1, "minus") for q in qs]
    assert np.all(np.diff(plus) >= -1e-12)
    assert np.all(np.diff(minus) <= 1e-12)


@settings(max_examples=40, deadline=None)
@given(control_sides(), momenta, st.floats(0, 2 * math.pi))
def test_directional_branch_matches_hull_sampling(side, p, angle):
    """The hull restriction equals a brute-force search over pairwise mixtures."""
    n = np.array([math.cos(angle), math.sin(angle)])
    vel, cost = side.velocities, side.costs
    theta = np.linspace(0.0, 1.0, 2001)
    best = -np.inf
    for i in range(len(vel)):
        for j in range(len(vel)):
            v = theta[:, None] * vel[i] + (1 - theta)[:, None] * vel[j]
            c = theta * cost[i] + (1 - theta) * cost[j]
            ok = v @ n >= -1e-12
            if ok.any():
                best = max(best, float(np.max(-(v[ok] @ np.asarray(p)) - c[ok])))
    exact = directional_half_hamiltonian(side, p, n, "minus")
    assert exact >= best - 1e-9
    # the sampled mixtures approach the exact value at the tangency points
    span = np.abs(vel).max() * (np.abs(p).sum() + 1) + np.abs(cost).max()
    assert exact <= best + 2e-3 * span


@settings(max_examples=40, deadline=None)
@given(control_sides(), coords)
def test_e0_matches_grid_minimum(side, p2):
    qs = np.linspace(-20, 20, 40001)
    grid_min = float(np.min(hamiltonian(side, np.stack([qs, np.full_like(qs, p2)], axis=1))))
    exact = e0(side, p2)
    assert exact <= grid_min + 1e-12
    assert grid_min - exact <= side.speed_bound * (qs[1] - qs[0])
