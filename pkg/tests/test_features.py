import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from clams.core import GaussianComponent, PairFeatures
from clams.errors import DegenerateComponent
from clams.features import DEFAULT_MASK, FeatureMask, feature_matrix, feature_vector, pair_features, size_of

comp = st.builds(
    lambda x, y, a, r, t, n: GaussianComponent((x, y), a, a * r, t, n),
    st.floats(-100, 100), st.floats(-100, 100), st.floats(0.05, 10), st.floats(0.05, 1.0),
    st.floats(0, math.pi - 1e-9), st.floats(10, 1000),
)


def test_size_examples():
    assert size_of(GaussianComponent((0, 0), 4, 3, 0, 1)) == 5.0
    assert size_of(GaussianComponent((0, 0), 1, 1, 0, 1)) == pytest.approx(math.sqrt(2))
    assert size_of(GaussianComponent((0, 0), 1, 1e-4, 0, 1)) == pytest.approx(1.0, abs=1e-6)


def test_identity_pair():
    c = GaussianComponent((1, 2), 2, 1, 0.4, 100)
    f = pair_features(c, c)
    assert f.values() == (0.0,) * 6


def test_three_four_five():
    a = GaussianComponent((0, 0), 1, 1, 0, 100)
    b = GaussianComponent((3, 4), 1, 1, 0, 100)
    f = pair_features(a, b)
    assert f.dc == 5.0
    assert f.dsr == pytest.approx(5 / (2 * math.sqrt(2)), abs=1e-9)
    assert (f.dd, f.sd, f.ed, f.ac) == (0.0, 0.0, 0.0, 0.0)


def test_angle_difference_literal():
    a = GaussianComponent((0, 0), 2, 1, 0.1, 100)
    b = GaussianComponent((0, 0), 2, 1, 3.0, 100)
    assert pair_features(a, b).ac == pytest.approx(2.9, abs=1e-12)


def test_zero_minor_axis_rejected():
    with pytest.raises(DegenerateComponent):
        pair_features(GaussianComponent((0, 0), 1, 0, 0, 10), GaussianComponent((1, 0), 1, 1, 0, 10))


@given(comp, comp)
def test_symmetry(a, b):
    assert pair_features(a, b).values() == pair_features(b, a).values()


@given(comp, comp, st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 2 * math.pi))
def test_rigid_motion_invariance(a, b, dx, dy, rot):
    c, s = math.cos(rot), math.sin(rot)

    def move(g):
        x, y = g.center
        return GaussianComponent((c * x - s * y + dx, s * x + c * y + dy), g.major_sd, g.minor_sd, g.angle + rot, g.soft_count)

    f0, f1 = pair_features(a, b).values(), pair_features(move(a), move(b)).values()
    for name, u, v in zip("dc dsr dd sd ed".split(), f0, f1):
        assert v == pytest.approx(u, rel=1e-9, abs=1e-9), name
    # AC is a circular difference; rotation may carry one angle across the fold at pi
    assert min(abs(f1[5] - f0[5]), abs(math.pi - f1[5] - f0[5])) < 1e-9 or abs(f1[5] - f0[5]) < 1e-9


@given(comp, comp, st.floats(0.1, 10))
def test_uniform_scaling(a, b, k):
    def scale(g):
        return GaussianComponent((g.center[0] * k, g.center[1] * k), g.major_sd * k, g.minor_sd * k, g.angle, g.soft_count)

    f, g = pair_features(a, b), pair_features(scale(a), scale(b))
    assert g.dc == pytest.approx(k * f.dc, rel=1e-9, abs=1e-9)
    assert g.sd == pytest.approx(k * f.sd, rel=1e-9, abs=1e-9)
    assert g.dd == pytest.approx(f.dd / k**2, rel=1e-9, abs=1e-9)
    for name in ("dsr", "ed", "ac"):
        assert getattr(g, name) == pytest.approx(getattr(f, name), rel=1e-9, abs=1e-9)


@given(comp, comp)
def test_angle_feature_range(a, b):
    f = pair_features(a, b)
    assert 0.0 <= f.ac < math.pi
    assert f.ac == abs(a.angle - b.angle)


def test_masks():
    zero = PairFeatures(0, 0, 0, 0, 0, 0)
    assert feature_vector(zero).tolist() == [0.0] * 5
    assert DEFAULT_MASK.names() == ("dc", "dsr", "sd", "ed", "ac")
    f = PairFeatures(1, 2, 3, 4, 5, 6)
    assert feature_vector(f, FeatureMask.all()).tolist() == [1, 2, 3, 4, 5, 6]
    only = FeatureMask.from_flags([n == "dsr" for n in ("dc", "dsr", "dd", "sd", "ed", "ac")])
    assert feature_vector(f, only).tolist() == [2.0]
    assert FeatureMask.without("dc", "dsr", base=FeatureMask.all()).names() == ("dd", "sd", "ed", "ac")
    assert feature_matrix([f, f], DEFAULT_MASK).shape == (2, 5)
    assert np.array_equal(feature_matrix([f], DEFAULT_MASK)[0], feature_vector(f))
