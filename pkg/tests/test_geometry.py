import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from hjhomog.errors import InvalidArguments, UndefinedNormal
from hjhomog.geometry import (
    FingerGeometry,
    InterfaceSpec,
    Region,
    ToothProfile,
    finger_region_of,
    normal,
    region_of,
)

PROFILE = ToothProfile.sine()


@pytest.mark.parametrize("x, expected", [
    ((0.5, 0.0125), Region.RIGHT),
    ((0.0, 0.05), Region.LEFT),
    ((-2.0, 0.03), Region.LEFT),
    ((2.0, 0.07), Region.RIGHT),
])
def test_region_examples(x, expected):
    spec = InterfaceSpec(PROFILE, eta=1.0, eps=0.1)
    assert region_of(spec, x) == expected


def test_points_on_graph_and_cap_are_on():
    spec = InterfaceSpec(PROFILE, eta=1.0, eps=0.1)
    # t = 0 lies outside the teeth where the graph sits at -eta + eta*eps*g(0)
    x1 = -1.0 + 0.1 * float(PROFILE.g(0.0))
    assert region_of(spec, (x1, 0.0)) == Region.ON
    # the cap at t = a spans the whole tooth height
    for x1 in (-0.9, 0.0, 0.9):
        assert region_of(spec, (x1, 0.025)) == Region.ON


@pytest.mark.parametrize("y, expected", [((-2.0, 0.5), Region.LEFT), ((-2.0, 0.1), Region.RIGHT),
                                         ((6.0, 0.0), Region.OUTSIDE), ((0.0, 0.5), Region.LEFT),
                                         ((0.3, 0.5), Region.RIGHT)])
def test_finger_examples(y, expected):
    fg = FingerGeometry(PROFILE, eta=1.0, rho=5.0)
    assert finger_region_of(fg, y) == expected


def test_finger_empty_interior_on_set():
    """The ON set is a curve: no grid cell has all four corners on it."""
    fg = FingerGeometry(PROFILE, eta=1.0, rho=3.0)
    y1, y2 = np.meshgrid(np.linspace(-3, 3, 97), np.linspace(0, 1, 65), indexing="ij")
    on = fg.classify(y1, y2) == Region.ON
    block = on[:-1, :-1] & on[1:, :-1] & on[:-1, 1:] & on[1:, 1:]
    # vertical caps are ON along a line of nodes, never a 2D block
    assert not block.any()


def test_finger_rejects_tips_outside_truncation():
    with pytest.raises(InvalidArguments):
        FingerGeometry(PROFILE, eta=1.0, rho=0.2)


def test_bad_profiles_rejected():
    with pytest.raises(InvalidArguments):
        ToothProfile.sine(0.5, 0.25)
    with pytest.raises(InvalidArguments):
        ToothProfile.sine(0.25, 0.6)  # sine does not vanish at b
    with pytest.raises(InvalidArguments):
        ToothProfile.from_samples(0.25, 0.75, [1.0])


def test_sampled_profile_interpolates():
    pr = ToothProfile.from_samples(0.25, 0.75, [0.0, 0.0, 0.0, 0.0])
    assert pr.max_abs == 0.0
    pr = ToothProfile.from_samples(0.25, 0.75, [0.2, 0.0, -0.2, 0.0])
    assert float(pr.g(0.125)) == pytest.approx(0.1)
    assert float(pr.slope(0.1)) == pytest.approx(-0.8)


@pytest.mark.parametrize("x, expected", [((0.0, 0.025), (0.0, -1.0)), ((0.0, 0.075), (0.0, 1.0))])
def test_normals_on_caps(x, expected):
    spec = InterfaceSpec(PROFILE, eta=1.0, eps=0.1)
    np.testing.assert_allclose(normal(spec, x), expected)


def test_normal_on_graph_is_unit_and_orthogonal():
    spec = InterfaceSpec(PROFILE, eta=1.0, eps=0.1)
    t = 0.4
    x2 = t * spec.period
    x1 = 1.0 + spec.period * float(PROFILE.g(t))
    n = normal(spec, (x1, x2))
    assert np.linalg.norm(n) == pytest.approx(1.0)
    tangent = np.array([float(PROFILE.slope(t)), 1.0])
    assert n @ tangent == pytest.approx(0.0, abs=1e-12)
    assert n[0] > 0


def test_normal_undefined_at_corners():
    spec = InterfaceSpec(PROFILE, eta=1.0, eps=0.1)
    with pytest.raises(UndefinedNormal):
        normal(spec, (1.0, 0.025))
    fg = FingerGeometry(PROFILE, eta=1.0, rho=5.0)
    with pytest.raises(UndefinedNormal):
        normal(fg, (0.0, 0.25))


def test_max_extent_bound():
    spec = InterfaceSpec(PROFILE, eta=0.5, eps=0.2)
    x1, x2 = np.meshgrid(np.linspace(-1, 1, 801), np.linspace(0, 0.3, 301), indexing="ij")
    on = spec.classify(x1, x2) == Region.ON
    assert np.abs(x1[on]).max() <= spec.max_extent() + 1e-12
    assert spec.max_extent() == pytest.approx(0.5 * (1 + 0.2 * 0.25))


scales = st.floats(0.05, 1.0)


@settings(max_examples=80, deadline=None)
@given(scales, scales, st.floats(-2, 2), st.floats(-3, 3), st.integers(-4, 4))
def test_interface_is_periodic_in_x2(eta, eps, x1, x2, k):
    spec = InterfaceSpec(PROFILE, eta, eps)
    shifted = x2 + k * spec.period
    # stay away from phase round-off on the caps
    t = (x2 / spec.period) % 1.0
    assume(min(abs(t - PROFILE.a), abs(t - PROFILE.b)) > 1e-6)
    assert spec.classify(x1, x2) == spec.classify(x1, shifted)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.2, 1.0), st.floats(0.02, 0.2), st.floats(-2.5, 2.5), st.floats(0.0, 1.0))
def test_finger_zoom_matches_rescaled_interface(eta, eps, y1, phase):
    """Near the right tooth tips the interface seen at (x - eta e1)/eps is the finger geometry."""
    spec = InterfaceSpec(PROFILE, eta, eps)
    fg = FingerGeometry(PROFILE, eta, rho=3.0)
    assume(min(abs(phase - PROFILE.a), abs(phase - PROFILE.b)) > 1e-6)
    y2 = phase * eta
    x1 = eta + eps * y1
    assume(x1 > 0.0)
    got = spec.classify(x1, eps * y2)
    want = fg.classify(y1, y2)
    if abs(float(fg.profile.g(phase)) * eta - y1) < 1e-9:
        return
    assert got == want


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.5, 2.5), st.floats(0.0, 1.0))
def test_mirrored_finger_reflects_regions(y1, phase):
    """Mirroring maps the left-finger geometry to right fingers reflected in y1."""
    pr = ToothProfile.sine(0.3, 0.8)
    assume(min(abs(phase - pr.a), abs(phase - pr.b)) > 1e-6)
    spec = InterfaceSpec(pr, 1.0, 0.1)
    mirror = InterfaceSpec(pr.mirrored(), 1.0, 0.1)
    x2 = phase * spec.period
    shift = (pr.b - pr.mirrored().a) * spec.period
    original = int(spec.classify(y1 * 0.5, x2))
    reflected = int(mirror.classify(-y1 * 0.5, x2 - shift))
    if Region.ON in (original, reflected):
        return
    assert reflected == -original
