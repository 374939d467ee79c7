import math

import numpy as np
import pytest

from gcoupling.coupling import ProperFn
from gcoupling.equilibrium import (EPInstance, EPVIPInstance, VIPInstance, ep_gap, ep_residual,
                                   epvip_gap, fenchel_conjugate, ik_and_Kstar, jemlws_certificate,
                                   kstar_grid, vip_gap, zdgp_check)
from gcoupling.extreal import GridSpec
from gcoupling.sets import SetSpec


@pytest.fixture(scope="module")
def ep():
    return EPInstance(SetSpec.box([0.0], [1.0]),
                      lambda X, Y: (X[..., 0] - 0.5) * (Y[..., 0] - X[..., 0]))


def test_residual_and_gap(ep):
    assert ep_residual(ep, [0.5]) == 0.0
    assert ep_residual(ep, [0.0]) == pytest.approx(-0.5)
    assert ep_gap(ep, [0.5]) == 0.0
    with pytest.raises(ValueError):
        ep_residual(ep, [2.0])


def test_diagonal(ep):
    assert ep.check_diagonal(np.linspace(0, 1, 11)[:, None])


def test_support_function_and_barrier_cone():
    assert ik_and_Kstar(SetSpec.box([0.0], [1.0]), [-2.0]) == (-2.0, True)
    val, inside = ik_and_Kstar(SetSpec.orthant(2), [-1.0, 0.0])
    assert val == -math.inf and not inside
    assert ik_and_Kstar(SetSpec.box([-1, -1], [1, 1]), [1.0, -3.0]) == (-4.0, True)


def test_fenchel_conjugate_of_a_square():
    f = ProperFn(1, lambda X: X[..., 0] ** 2 / 2)
    vals = fenchel_conjugate(f, np.array([[0.0], [1.0], [3.0]]), GridSpec.centered(20.0, 1, 201))
    assert vals == pytest.approx([0.0, 0.5, 4.5], abs=1e-9)


def test_zdgp_both_couplings(ep):
    for name in ("cone_inner", "ik_shifted"):
        rep = zdgp_check(ep, name, [[0.0], [0.5], [1.0]], tol=1e-4)
        assert rep["verdict"] == "holds", name
        assert all(abs(r["sum"]) <= 1e-4 for r in rep["rows"])
    rows = zdgp_check(ep, "ik_shifted", [[0.5]])["rows"]
    assert rows[0]["identity_holds"] and rows[0]["fenchel_lower_bound"]


def test_certificate_at_the_solution(ep):
    c = jemlws_certificate(ep, [0.5])
    assert c["status"] == "certified" and c["xstar"] == [0.0]
    assert jemlws_certificate(ep, [0.0])["status"] == "none"


def test_certificate_sweep_matches_residual(ep):
    for xb in np.linspace(0.0, 1.0, 21):
        cert = jemlws_certificate(ep, [xb])["status"] == "certified"
        assert cert == (ep_residual(ep, [xb]) >= -1e-6), xb


def test_kstar_grid_regions():
    K = SetSpec.box([0.0], [1.0])
    assert kstar_grid(K, "ik_shifted", 4.0, 9).box.lo == (-4.0,)
    assert kstar_grid(SetSpec.orthant(1), "cone_inner", 4.0, 9).box.lo == (0.0,)


def test_vip_gap():
    vip = VIPInstance.on_grid(SetSpec.box([-1], [1]), [[1.0]], [0.0], GridSpec.on([-1], [1], 201))
    assert vip_gap(vip, [0.0]) == 0.0
    assert vip_gap(vip, [1.0]) == 0.25
    assert vip.monotone_on_sample()
    assert vip_gap(vip, np.array([[0.0], [1.0]])).tolist() == [0.0, 0.25]


def test_epvip_gap():
    ev = EPVIPInstance(lambda x: x, lambda y, x: y - x, ProperFn(1, lambda X: 0.0 * X[..., 0]))
    assert epvip_gap(ev, [0.0]) == 0.0
    assert epvip_gap(ev, [1.0]) == -math.inf
