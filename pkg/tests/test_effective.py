import numpy as np
import pytest

from hjhomog.cells import FluxLimiterCurve, effective_table
from hjhomog.effective import EffectiveProblemSpec, compare_fields, solve_effective
from hjhomog.engines.grid import Grid, ValueField
from hjhomog.errors import InvalidArguments, OutOfWindow, ResolutionError
from hjhomog.geometry import ToothProfile
from hjhomog.instances import asym_pair, benchmark_far_field, crossing_far_field, identical_pair

PROFILE = ToothProfile.sine()
SAMPLES = [(x,) for x in np.linspace(-3.0, 3.0, 13)]


def test_flat_identical_inactive_limiter_is_constant():
    fld = solve_effective(EffectiveProblemSpec("flat", identical_pair(), limiters={"E": -1.0}))
    np.testing.assert_allclose(fld.values, 1.0, atol=1e-12)


def test_flat_active_limiter_lowers_the_junction_value():
    fld = solve_effective(EffectiveProblemSpec("flat", identical_pair(), limiters={"E": 0.0}))
    assert fld((0.0,)) < 1.0 - 0.5
    assert fld((0.0,)) == pytest.approx(0.0, abs=1e-12)
    assert fld((5.0,)) == pytest.approx(1.0 - np.exp(-5.0), abs=0.02)


def test_flat_accepts_limiter_curves():
    curve = FluxLimiterCurve("E_limit", [-1.0, 0.0, 1.0], [3.0, 0.0, 3.0])
    a = solve_effective(EffectiveProblemSpec("flat", identical_pair(), limiters={"E": curve}))
    b = solve_effective(EffectiveProblemSpec("flat", identical_pair(), limiters={"E": 0.0}))
    np.testing.assert_array_equal(a.values, b.values)


def test_direct_identical_media_is_constant():
    fld = solve_effective(EffectiveProblemSpec("direct", identical_pair(), eta=0.2, eps=0.2, profile=PROFILE,
                                               window=(-2.0, 2.0), h=1 / 40))
    np.testing.assert_allclose(fld.values, 1.0, atol=1e-10)


def test_identical_media_all_kinds_agree():
    pair = identical_pair(benchmark_far_field())
    hm = pair.left.restrict_to_line(0.0)
    flat = solve_effective(EffectiveProblemSpec("flat", pair, limiters={"E": -1.0}))
    eta = solve_effective(EffectiveProblemSpec("eta", pair, eta=0.2, hm=hm, limiters={"LM": -1.0, "MR": -1.0}))
    direct = solve_effective(EffectiveProblemSpec("direct", pair, eta=0.2, eps=0.2, profile=PROFILE))
    assert compare_fields(flat, eta, SAMPLES).max_error <= 1e-10
    assert compare_fields(flat, direct, SAMPLES).max_error <= 1e-10


def test_solutions_respect_the_value_bound():
    pair = asym_pair(benchmark_far_field())
    fld = solve_effective(EffectiveProblemSpec("direct", pair, eta=0.4, eps=0.4, profile=PROFILE))
    assert fld.sup <= (pair.cost_bound + 2.0) / 1.0 + 1e-12


def test_spec_validation():
    pair = identical_pair()
    with pytest.raises(InvalidArguments):
        EffectiveProblemSpec("bogus", pair)
    with pytest.raises(InvalidArguments):
        EffectiveProblemSpec("flat", pair, discount=0.0)
    with pytest.raises(InvalidArguments):
        EffectiveProblemSpec("flat", pair, window=(1.0, 2.0))
    with pytest.raises(InvalidArguments):
        solve_effective(EffectiveProblemSpec("flat", pair))
    with pytest.raises(InvalidArguments):
        solve_effective(EffectiveProblemSpec("eta", pair, eta=0.2, limiters={"LM": -1.0, "MR": -1.0}))
    with pytest.raises(InvalidArguments):
        solve_effective(EffectiveProblemSpec("direct", pair, eta=0.2))


def test_resolution_errors():
    pair = identical_pair()
    with pytest.raises(ResolutionError):
        solve_effective(EffectiveProblemSpec("direct", pair, eta=0.2, eps=0.2, profile=PROFILE, cells_per_period=4))
    with pytest.raises(ResolutionError):
        solve_effective(EffectiveProblemSpec("eta", pair, eta=0.21, hm=pair.left.restrict_to_line(0.0),
                                             limiters={"LM": -1.0, "MR": -1.0}))
    with pytest.raises(ResolutionError):
        solve_effective(EffectiveProblemSpec("flat", pair, limiters={"E": -1.0}, h=0.7))


def test_compare_fields_examples():
    grid = Grid.interval(-1.0, 1.0, 21)
    a = ValueField(grid, np.sin(grid.axis(0)))
    assert compare_fields(a, a, [(-0.5,), (0.25,)]).max_error == 0.0
    rep = compare_fields(a, a.shifted(-0.3), [(-0.5,), (0.0,), (0.25,)])
    assert rep.max_error == pytest.approx(0.3)
    assert rep.mean_error == pytest.approx(0.3)
    with pytest.raises(OutOfWindow) as info:
        compare_fields(a, a, [(0.0,), (2.0,)])
    assert info.value.points == [(2.0,)]


def test_compare_reads_one_dimensional_fields_as_invariant():
    grid2 = Grid.strip(-1.0, 1.0, 21, 1.0, 4)
    x1 = grid2.mesh()[0]
    two = ValueField(grid2, x1 ** 2)
    one = ValueField(Grid.interval(-1.0, 1.0, 21), Grid.interval(-1.0, 1.0, 21).axis(0) ** 2)
    assert compare_fields(two, one, [(0.5,), (-0.3,)]).max_error <= 1e-12


@pytest.fixture(scope="module")
def crossing():
    """ASYM media with a far-field reward on the right: trajectories cross the interface."""
    pair = asym_pair(crossing_far_field())
    flat = solve_effective(EffectiveProblemSpec("flat", pair, limiters={"E": -1.0}))
    return pair, flat


def test_direct_converges_to_flat_on_crossing_benchmark(crossing):
    pair, flat = crossing
    errors = []
    for scale in (0.4, 0.2, 0.1):
        direct = solve_effective(EffectiveProblemSpec("direct", pair, eta=scale, eps=scale, profile=PROFILE))
        errors.append(compare_fields(direct, flat, SAMPLES).max_error)
    assert errors[0] > errors[1] > errors[2]
    assert errors[-1] < 0.01


def test_eta_strip_converges_to_flat_on_crossing_benchmark(crossing):
    pair, flat = crossing
    hm = effective_table(pair, PROFILE, 1.0, np.linspace(-3, 3, 49), [0.0], nodes=40)
    errors = []
    for eta in (0.4, 0.2, 0.1):
        strip = solve_effective(EffectiveProblemSpec("eta", pair, eta=eta, hm=hm,
                                                     limiters={"LM": -1.0, "MR": -1.0}))
        errors.append(compare_fields(strip, flat, SAMPLES).max_error)
    assert errors[0] > errors[1] > errors[2]
