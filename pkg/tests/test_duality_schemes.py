import math

import numpy as np
import pytest

from gcoupling.coupling import ProperFn
from gcoupling.duality_schemes import (ConstrainedProblem, PerturbationScheme,
                                       classic_recovery_check, hstar_table, lagrangian_coupling,
                                       lagrangian_direct, lagrangian_dual_report, marginal,
                                       perturbation_report)
from gcoupling.extreal import GridSpec

XG = GridSpec.centered(20.0, 1, 201)
UG = GridSpec.centered(20.0, 1, 41, 4)
USG = GridSpec.centered(2.0, 1, 21, 0)


def sq():
    return ProperFn(1, lambda X: X[..., 0] ** 2)


def shift_scheme():
    return PerturbationScheme(lambda X, U: (X[..., 0] - U[..., 0]) ** 2, 1, 1, sq(), "shift")


def quad_scheme():
    return PerturbationScheme(lambda X, U: X[..., 0] ** 2 + U[..., 0] * X[..., 0] + U[..., 0] ** 2,
                              1, 1, sq(), "quad")


def test_marginal_of_the_quadratic_scheme():
    # h(u) = inf_x x^2 + u x + u^2 = 3 u^2 / 4
    U = np.array([[-1.0], [0.0], [2.0]])
    assert marginal(quad_scheme(), U, XG) == pytest.approx([0.75, 0.0, 3.0], abs=1e-9)


def test_quadratic_scheme_hstar_closed_form():
    # h*(v) = sup_u v u - 3 u^2 / 4 = v^2 / 3
    hs = hstar_table(quad_scheme(), USG, UG, XG)
    assert np.max(np.abs(hs.values - hs.points[:, 0] ** 2 / 3)) <= 1e-6


def test_shift_scheme_report():
    r = perturbation_report(shift_scheme(), XG, UG, USG)
    assert r["alpha"] == 0.0 and r["beta"] == 0.0
    assert r["weak_duality"] and r["no_gap"] and r["gap_nonnegative"]
    assert r["hstar_equals_phistar"]
    vals = dict(zip([p[0] for p in r["hstar"]["points"]], r["hstar"]["values"]))
    assert vals[0.0] == 0.0 and vals[1.0] == math.inf


def test_linear_scheme_has_infinite_beta():
    s = PerturbationScheme(lambda X, U: X[..., 0] ** 2 + U[..., 0] * X[..., 0], 1, 1, sq(), "lin")
    r = perturbation_report(s, XG, UG, USG)
    assert r["beta"] == math.inf and r["weak_duality"] and not r["no_gap"]
    assert r["gap_nonnegative"] is None


def test_inconsistent_scheme_is_rejected():
    s = PerturbationScheme(lambda X, U: X[..., 0] ** 2 + 1 + U[..., 0], 1, 1, sq(), "off")
    with pytest.raises(ValueError):
        perturbation_report(s, XG, UG, USG)


def test_classic_recovery():
    for s in (shift_scheme(), quad_scheme()):
        c = classic_recovery_check(s, XG, UG, USG)
        assert c["verdict"] == "holds" and c["membership"]["member"], s.name


def _problem(constraint):
    return ConstrainedProblem(sq(), [constraint])


def test_lagrangian_bridge():
    p = _problem(lambda X: 1.0 - X[..., 0])
    lg = GridSpec.on([0.0], [10.0], 101, 0)
    r = lagrangian_dual_report(p, XG, lg, 1e-4)
    assert r["primal_value"] == pytest.approx(1.0, abs=1e-4)
    assert r["dual_value"] == pytest.approx(1.0, abs=1e-4)
    assert r["engine_vs_direct_max_diff"] <= 1e-10
    lam = np.array(r["multipliers"])
    want = np.where(lam <= 2, -1.0, lam ** 2 / 4 - lam)
    assert np.max(np.abs(np.array(r["conjugate"]) - want)) <= 1e-6


def test_lagrangian_direct_formula():
    p = _problem(lambda X: 1.0 - X[..., 0])
    assert lagrangian_direct(p, np.array([[0.0], [4.0]]), XG) == pytest.approx([-1.0, 0.0])


def test_vacuous_constraint():
    p = _problem(lambda X: np.full(X.shape[:-1], -1.0))
    r = lagrangian_dual_report(p, XG, GridSpec.on([0.0], [10.0], 101, 0))
    assert r["primal_value"] == 0.0 and r["dual_value"] == 0.0


def test_infeasible_grid_is_an_error():
    p = _problem(lambda X: 100.0 - X[..., 0])
    with pytest.raises(ValueError):
        lagrangian_dual_report(p, XG, GridSpec.on([0.0], [10.0], 11, 0))


def test_lagrangian_coupling_shape():
    g = lagrangian_coupling(_problem(lambda X: 1.0 - X[..., 0]))
    assert (g.n, g.m) == (1, 1)
    assert g(np.array([[3.0]]), np.array([[2.0]]))[0] == 4.0
