import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hjhomog.convex1d import Hamiltonian1D, zero_drift_level
from hjhomog.errors import EmptyLevelSet, NonCoerciveHamiltonian


def abs_minus_one():
    """``|q| - 1`` as pieces (v, c): q -> max(-q*v - c)."""
    return Hamiltonian1D([1.0, -1.0, 0.0], [1.0, 1.0, 1.0])


def test_abs_value_basics():
    ham = abs_minus_one()
    assert ham.e0 == -1.0
    np.testing.assert_allclose(ham(np.array([-2.0, 0.0, 0.5])), [1.0, -1.0, -0.5])
    assert ham.argmin_interval() == pytest.approx((0.0, 0.0))
    assert ham.level_roots(0.0) == pytest.approx((-1.0, 1.0))
    assert ham.max_speed == 1.0


def test_branches_of_abs_value():
    ham = abs_minus_one()
    q = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(ham.plus(q), np.maximum(q, 0.0) - 1.0)
    np.testing.assert_allclose(ham.minus(q), np.maximum(-q, 0.0) - 1.0)
    np.testing.assert_allclose(np.maximum(ham.plus(q), ham.minus(q)), ham(q))


def test_level_below_minimum_raises():
    with pytest.raises(EmptyLevelSet):
        abs_minus_one().level_roots(-1.5)


def test_level_at_minimum_returns_argmin_interval():
    ham = Hamiltonian1D([1.0, -1.0, 0.0], [1.0, 1.0, 0.5])  # max(|q|, 0.5) - 1
    assert ham.argmin_interval() == pytest.approx((-0.5, 0.5))
    assert ham.level_roots(-0.5) == pytest.approx((-0.5, 0.5))


def test_non_coercive_rejected():
    with pytest.raises(NonCoerciveHamiltonian):
        Hamiltonian1D([1.0, 0.0], [1.0, 1.0])


def test_zero_drift_level_two_pieces():
    # zero drift mixes v = 2 (cost 1) and v = -1 (cost 4) with weights 1/3, 2/3
    assert zero_drift_level([2.0, -1.0], [1.0, 4.0]) == pytest.approx(-3.0)
    assert zero_drift_level([2.0, 3.0], [1.0, 4.0]) == -np.inf


def test_from_samples_reproduces_convex_function():
    q = np.linspace(-2, 2, 41)
    vals = np.maximum(2 * np.abs(q), 0.5) - 1.0
    ham = Hamiltonian1D.from_samples(q, vals)
    np.testing.assert_allclose(ham(q), vals, atol=1e-12)
    # linear extension beyond the samples
    assert ham(3.0) == pytest.approx(5.0)
    assert ham.e0 == pytest.approx(-0.5)
    # the interpolant is flat between the last samples at the minimum level
    assert ham.argmin_interval() == pytest.approx((-0.2, 0.2), abs=1e-12)


pieces = st.lists(st.tuples(st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3), st.floats(-2, 2)),
                  min_size=1, max_size=6)


@settings(max_examples=80, deadline=None)
@given(pieces, st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_e0_and_roots_against_grid(extra, v_pos, v_neg, c_pos, c_neg):
    v = [v_pos, -v_neg] + [p[0] for p in extra]
    c = [c_pos, c_neg] + [p[1] for p in extra]
    ham = Hamiltonian1D(v, c)
    qs = np.linspace(-30, 30, 60001)
    vals = ham(qs)
    assert ham.e0 <= vals.min() + 1e-12
    assert vals.min() - ham.e0 <= ham.max_speed * (qs[1] - qs[0])
    level = ham.e0 + 0.7
    lo, hi = ham.level_roots(level)
    assert ham(lo) == pytest.approx(level, abs=1e-9)
    assert ham(hi) == pytest.approx(level, abs=1e-9)
    assert ham.minus(lo) == pytest.approx(level, abs=1e-9)
    assert ham.plus(hi) == pytest.approx(level, abs=1e-9)
    inside = qs[(qs > lo + 1e-6) & (qs < hi - 1e-6)]
    assert np.all(ham(inside) <= level + 1e-9)
