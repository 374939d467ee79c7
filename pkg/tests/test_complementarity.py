import math
from fractions import Fraction

import numpy as np
import pytest

from gcoupling.complementarity import (CPInstance, cp_check, cp_dual_closed_form, cp_dual_engine,
                                       cp_zdgp_equivalence, lcp_enumerate)
from gcoupling.equilibrium import ep_residual
from gcoupling.extreal import GridSpec
from gcoupling.sets import SetSpec

M = [[2, 1], [1, 2]]


def test_enumeration_is_exact():
    r = lcp_enumerate(M, [-1, -1])
    assert r.solution == (Fraction(1, 3), Fraction(1, 3))
    assert r.active_set == (0, 1)
    assert lcp_enumerate(M, [1, 1]).solution == (0, 0)


def test_infeasible_and_degenerate():
    assert not lcp_enumerate([[-1, 0], [0, -1]], [-1, -1]).found
    # one positive coordinate: x = (1/2, 0), w = (0, 1/2)
    assert lcp_enumerate(M, [-1, 0]).as_floats() == [0.5, 0.0]


def test_brute_force_agreement_on_random_p_matrices():
    rng = np.random.default_rng(3)
    for _ in range(20):
        A = rng.integers(-3, 4, (3, 3))
        Mr = A @ A.T + np.eye(3)      # positive definite: unique solution
        q = rng.integers(-5, 6, 3)
        r = lcp_enumerate(Mr, q)
        x = np.array(r.as_floats())
        w = Mr @ x + q
        assert np.all(x >= -1e-12) and np.all(w >= -1e-12) and abs(x @ w) <= 1e-9


def test_cp_check():
    cp = CPInstance(M, [-1, -1])
    assert cp_check(cp, [1 / 3, 1 / 3])
    assert not cp_check(cp, [0, 0])


def test_instance_validation():
    with pytest.raises(ValueError):
        CPInstance([[1, 2]], [1])
    with pytest.raises(ValueError):
        CPInstance(M, [1, 1], SetSpec.box([0, 0], [1, 1]))


def test_closed_form_dual_against_engine():
    cp = CPInstance(M, [-1, -1])
    yg = GridSpec(SetSpec.orthant(2).bounding_box(4.0), 21, 2)
    XS = [[0, 0], [1, 1], [2, 2], [3, 0]]
    eng = cp_dual_engine(cp, [1, 1], XS, yg)
    closed = [cp_dual_closed_form(cp, [1, 1], s) for s in XS]
    assert closed == [4.0, 4.0, 4.0, math.inf]
    assert eng.tolist() == pytest.approx(closed)


def test_feasible_set_equivalence():
    cp = CPInstance(M, [-1, -1])
    X = np.array([[a, b] for a in np.arange(0, 2.01, 0.25) for b in np.arange(0, 2.01, 0.25)]
                 + [[1 / 3, 1 / 3]])
    r = cp_zdgp_equivalence(cp, X)
    assert r["verdict"] == "holds"
    assert r["rows"][-1]["solution"] and r["rows"][-1]["dual_inf"] == pytest.approx(0.0, abs=1e-12)


def test_as_ep_residual_vanishes_at_solution():
    cp = CPInstance(M, [-1, -1])
    ep = cp.as_ep()
    yg = GridSpec(SetSpec.orthant(2).bounding_box(4.0), 21, 2)
    assert ep_residual(ep, [1 / 3, 1 / 3], yg) == pytest.approx(0.0, abs=1e-12)
