import math

import numpy as np
import pytest

from gcoupling.conjugate import (GammaFn, closure_experiment, dual_attainment, duality_report,
                                 g_biconjugate, g_conjugate, g_conjugate_at, gamma_eval,
                                 membership_Ff, primal_inf)
from gcoupling.coupling import ProperFn, builtin_coupling
from gcoupling.extreal import GridSpec
from gcoupling.sets import SetSpec

XG = GridSpec.centered(20.0, 1, 201)
CG = GridSpec.centered(2.0, 1, 41)


def sq():
    return ProperFn(1, lambda X: X[..., 0] ** 2, name="x^2")


def test_quartic_conjugate_against_scipy_oracle():
    # sup_x (x s)^2 - x^4 = s^4 / 4; values frozen from scipy's bounded scalar search
    oracle = {0.5: 0.015625, 1.0: 0.25, 1.5: 1.265625, 2.0: 4.0}
    f = ProperFn(1, lambda X: X[..., 0] ** 4)
    res = g_conjugate_at(f, builtin_coupling("square_product"), [[s] for s in oracle], XG)
    for r, want in zip(res, oracle.values()):
        assert r.value == pytest.approx(want, abs=1e-6)


def test_example1_conjugate_and_biconjugate():
    f, g = sq(), builtin_coupling("square_product")
    fg = g_conjugate(f, g, CG, XG)
    s = fg.points[:, 0]
    assert np.all(fg.values[np.abs(s) <= 1] == 0.0)
    assert np.all(fg.values[np.abs(s) > 1] == math.inf)
    assert set(fg.status[np.abs(s) > 1]) == {"divergent"}
    fgg = g_biconjugate(f, g, fg, GridSpec.centered(2.0, 1, 21, 0))
    assert np.max(np.abs(fgg.values - fgg.points[:, 0] ** 2)) <= 1e-4


def test_example2_is_not_a_member():
    f = ProperFn(1, lambda X: X[..., 0] ** 2, SetSpec.orthant(1))
    g = builtin_coupling("reciprocal")
    cg = GridSpec.on([0.0], [4.0], 41, 0)
    fg = g_conjugate(f, g, cg, XG)
    assert np.max(np.abs(fg.values - 1.0)) <= 1e-3
    v = membership_Ff(f, g, XG, cg, fg=fg)
    assert not v.member and v.inf_gamma == pytest.approx(1.0, abs=1e-3)
    assert duality_report(f, g, XG, cg)["verdict"] == "not_member"


def test_example3_member_with_unattained_primal():
    f, g = ProperFn(1, lambda X: np.exp(X[..., 0])), builtin_coupling("exp")
    fg = g_conjugate(f, g, CG, XG)
    s = fg.points[:, 0]
    assert np.max(np.abs(fg.values[s <= 0])) <= 1e-6
    assert np.all(fg.values[s > 0] == math.inf)
    rep = duality_report(f, g, XG, CG)
    assert rep["verdict"] == "holds" and rep["inf_f_attained"] is False
    assert rep["minimizer_transfers"] is None
    att = dual_attainment(f, g, XG, CG)
    assert att["status"] == "solved" and att["xstar"] == [0.0]
    assert att["relative_interior"] == "assumed"


def test_norm_on_dom_gives_the_norm():
    f = sq()
    g = builtin_coupling("norm_on_dom", dom=f)
    fg = g_conjugate(f, g, CG, XG)
    assert np.array_equal(fg.values, np.abs(fg.points[:, 0]))
    assert membership_Ff(f, g, XG, CG, fg=fg).member


def test_norm_on_dom_shifted_oracle():
    # f = (x - 1)^2 + 0.5 has inf 0.5, so f^g(s) = |s| - 0.5
    f = ProperFn(1, lambda X: (X[..., 0] - 1) ** 2 + 0.5)
    g = builtin_coupling("norm_on_dom", dom=f)
    fg = g_conjugate(f, g, CG, XG)
    assert np.max(np.abs(fg.values - (np.abs(fg.points[:, 0]) - 0.5))) <= 1e-12
    rep = duality_report(f, g, XG, CG)
    assert rep["verdict"] == "holds" and rep["minimizer"] == [1.0]


def test_unbounded_f_makes_norm_conjugate_improper():
    f = ProperFn(1, lambda X: X[..., 0])
    g = builtin_coupling("norm_on_dom", dom=f)
    v = membership_Ff(f, g, XG, CG)
    assert not v.member and not v.fg_proper


def test_primal_inf_follows_widening():
    r = primal_inf(ProperFn(1, lambda X: np.exp(X[..., 0])), XG)
    assert r.value == pytest.approx(0.0, abs=1e-6)


def test_gamma_values_and_memo():
    f, g = sq(), builtin_coupling("square_product")
    G = GammaFn(f, g, g_conjugate(f, g, CG, XG), XG)
    assert G(1.5, 0.5) == 2.25
    assert G(1.5, 2.0) == math.inf
    # 0.37 is off the C-grid and computed on demand
    assert gamma_eval(G, 1.0, 0.37) == pytest.approx(1.0, abs=1e-9)
    assert G.conjugate_many([[0.37], [3.0]]).tolist()[1] == math.inf


def test_closure_experiment_converges():
    f, g = sq(), builtin_coupling("square_product")
    rep = closure_experiment(lambda k: ProperFn(1, lambda X, k=k: X[..., 0] ** 2 + 1 / k),
                             lambda k: g, f, g, 4, XG, CG)
    assert rep["verdict"] == "holds"
    assert [r["dist_f"] for r in rep["rows"]] == pytest.approx([1, 1 / 2, 1 / 3, 1 / 4])


def test_conjugate_grid_dimension_check():
    with pytest.raises(ValueError):
        g_conjugate_at(sq(), builtin_coupling("square_product"), [[0.0]],
                       GridSpec.centered(1.0, 2, 5))
