import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcoupling.extreal import (Box, EvaluationError, GridCapError, GridSpec, OptResult,
                               as_points, check_no_nan, ext_add_upper, ext_sub_lower,
                               optimize_many, optimize_over_grid)

INF = math.inf
reals = st.floats(-1e6, 1e6) | st.sampled_from([INF, -INF])


def test_extended_addition_conventions():
    assert ext_add_upper(INF, -INF) == INF
    assert ext_add_upper(-INF, 3.0) == -INF
    assert ext_sub_lower(INF, INF) == -INF
    assert ext_sub_lower(2.0, -INF) == INF


@given(reals, reals)
def test_upper_addition_commutes(a, b):
    assert ext_add_upper(a, b) == ext_add_upper(b, a)


@given(reals, reals)
def test_lower_subtraction_never_exceeds_upper_sum(a, b):
    # a - b under the lower convention is at most a + (-b) under the upper one
    assert ext_sub_lower(a, b) <= ext_add_upper(a, -b)


def test_nan_is_an_error():
    with pytest.raises(EvaluationError):
        check_no_nan(np.array([1.0, np.nan]))


def test_box_operations():
    b = Box((-1.0, 0.0), (1.0, 2.0))
    assert b.dim == 2
    assert b.doubled().lo == (-2.0, -1.0)
    x, y = b.product(Box.centered(3.0, 1)).split(2)
    assert x == b and y == Box.centered(3.0, 1)
    assert b.contains([[0.0, 1.0], [2.0, 1.0]]).tolist() == [True, False]
    with pytest.raises(ValueError):
        Box((1.0,), (0.0,))


def test_grid_points_and_cap(monkeypatch):
    g = GridSpec.on([0, 0], [1, 1], 3)
    assert g.points().shape == (9, 2)
    assert g.points()[4].tolist() == [0.5, 0.5]
    monkeypatch.setenv("GCOUPLING_POINT_CAP", "8")
    with pytest.raises(GridCapError):
        GridSpec.on([0, 0], [1, 1], 3).points()


def test_attained_minimum_with_refinement():
    r = optimize_over_grid(lambda p: (p[..., 0] - 0.123) ** 2, GridSpec.on([-1], [1], 21, 4), "inf")
    assert r.status == "attained" and not r.widened
    assert abs(r.arg[0] - 0.123) < 1e-4


def test_divergence_is_detected():
    r = optimize_over_grid(lambda p: p[..., 0], GridSpec.centered(1.0, 1, 11), "sup")
    assert r.status == "divergent" and r.value == INF
    r = optimize_over_grid(lambda p: p[..., 0], GridSpec.centered(1.0, 1, 11), "inf", widen="follow")
    assert r.value == -INF


def test_classify_keeps_value_but_flags_edge_supremum():
    # sup of -exp(x) is 0, approached as x -> -inf but never reached
    r = optimize_over_grid(lambda p: -np.exp(p[..., 0]), GridSpec.centered(5.0, 1, 11), "sup")
    assert r.widened
    assert r.value == pytest.approx(-math.exp(-5.0))
    f = optimize_over_grid(lambda p: -np.exp(p[..., 0]), GridSpec.centered(5.0, 1, 11), "sup",
                           widen="follow")
    assert f.value > r.value


def test_empty_domain():
    r = optimize_over_grid(lambda p: np.full(p.shape[:-1], INF), GridSpec.centered(1.0, 1, 5), "inf")
    assert r.status == "empty-domain" and r.arg is None


def test_optimize_many_rows_are_independent():
    c = np.array([0.25, -0.5, 0.75])

    def phi(P, rows):
        return -(P[..., 0] - c[rows][:, None]) ** 2

    lo = np.full((3, 1), -1.0)
    hi = np.full((3, 1), 1.0)
    res = optimize_many(phi, lo, hi, GridSpec.on([-1], [1], 9, 0), "sup")
    assert [r.arg[0] for r in res] == c.tolist()


def test_optresult_invariants():
    with pytest.raises(ValueError):
        OptResult(1.0, None, "attained")
    with pytest.raises(ValueError):
        OptResult(1.0, None, "divergent")


def test_as_points():
    assert as_points(2.0).shape == (1, 1)
    assert as_points([1, 2], dim=2).shape == (1, 2)
    assert as_points([1, 2], dim=1).shape == (2, 1)
