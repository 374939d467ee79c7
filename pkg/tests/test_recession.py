import numpy as np
import pytest

from gcoupling.conjugate import GammaFn, g_conjugate
from gcoupling.coupling import ProperFn, builtin_coupling
from gcoupling.extreal import Box, GridSpec
from gcoupling.recession import (DirectionSet, PointCloud, RecessionSetup, R_gamma,
                                 compactness_verdict, level_set_sample, recession_directions,
                                 sphere_directions, zero_set)
from gcoupling.sets import SetSpec

XG = GridSpec.centered(20.0, 1, 201)
CG = GridSpec.centered(2.0, 1, 41)
NEG_QUADRANT = SetSpec.halfspaces([[-1.0, 0.0], [0.0, -1.0]], [0.0, 0.0])


def _gamma(f, g):
    return GammaFn(f, g, g_conjugate(f, g, CG, XG), XG)


@pytest.fixture(scope="module")
def gamma1():
    return _gamma(ProperFn(1, lambda X: X[..., 0] ** 2), builtin_coupling("square_product"))


@pytest.fixture(scope="module")
def gamma3():
    return _gamma(ProperFn(1, lambda X: np.exp(X[..., 0])), builtin_coupling("exp"))


def test_sphere_grids():
    assert sphere_directions(2).shape == (360, 2)
    assert sphere_directions(1).tolist() == [[-1.0], [1.0]]
    s3 = sphere_directions(3)
    assert np.allclose(np.linalg.norm(s3, axis=1), 1.0)
    assert len(s3) > 600
    assert np.allclose(np.linalg.norm(sphere_directions(4), axis=1), 1.0)


def test_exact_cones():
    q = recession_directions(NEG_QUADRANT)
    assert q.as_dict()["count"] == 91
    assert recession_directions(SetSpec.box([0, 0], [1, 1])).is_zero


def test_sampled_half_line_matches_exact_ray():
    # the ray {(t, t) : t >= 0} sampled on a large grid
    t = np.linspace(0, 1000, 4001)
    cloud = PointCloud(np.stack([t, t], axis=1), Box.centered(1000.0, 2))
    d = recession_directions(cloud)
    ray = recession_directions(SetSpec.halfspaces([[1, -1], [-1, 1], [1, 1]], [0, 0, 0]))
    assert d.hausdorff(ray) <= 1.5


def test_bounded_cloud_has_zero_cone_and_empty_cloud_too():
    pts = np.random.default_rng(0).uniform(-1, 1, (500, 2))
    assert recession_directions(PointCloud(pts, Box.centered(100.0, 2))).is_zero
    assert recession_directions(PointCloud(np.zeros((0, 2)), Box.centered(10.0, 2))).is_zero


def test_ladder_must_fit_in_the_box():
    with pytest.raises(ValueError):
        recession_directions(PointCloud(np.ones((1, 2)), Box.centered(1.0, 2)), ladder=[0.5, 4.0])


def test_direction_set_algebra():
    a = DirectionSet(2, np.arange(360) < 90)
    b = DirectionSet(2, np.arange(360) < 45)
    zero = DirectionSet(2, np.zeros(360, dtype=bool))
    assert (a & b).as_dict()["count"] == 45
    assert b.issubset(a) and not a.issubset(b)
    assert zero.hausdorff(zero) == 0.0
    assert zero.hausdorff(a) == np.inf
    assert a.hausdorff(b) == pytest.approx(45.0)


def test_level_sets_and_zero_sets(gamma1, gamma3):
    assert len(level_set_sample(gamma1, -1.0, Box.centered(2.0, 2), 41)) == 0
    m1 = zero_set(gamma1, Box.centered(2.0, 2), 41)
    # m = {0} x [-1, 1] on the 0.1-spaced grid
    assert len(m1) == 21 and np.all(m1.points[:, 0] == 0.0)
    assert zero_set(gamma3, Box.centered(2.0, 2), 41).empty


def test_compactness_example1(gamma1):
    v = compactness_verdict(gamma1, RecessionSetup.default(2))
    assert v["R_is_zero"] and v["m_nonempty"] and v["m_compact"]
    for k in ("theorem_equivalence", "lemma_l1_inclusion", "lemma_lpt", "ladder_agrees",
              "prop1_ii"):
        assert v[k], k
    assert v["lsc"] == "assumed"


def test_compactness_example3(gamma3):
    setup = RecessionSetup.default(2)
    v = compactness_verdict(gamma3, setup)
    assert not v["R_is_zero"] and not v["m_nonempty"]
    for k in ("theorem_equivalence", "lemma_l1_inclusion", "lemma_lpt", "ladder_agrees"):
        assert v[k], k
    R = R_gamma(gamma3, setup)
    assert R.hausdorff(recession_directions(NEG_QUADRANT)) <= 1.5
