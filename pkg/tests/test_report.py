import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcoupling.report import Report, dumps_csv, dumps_json, table, to_plain


def test_plain_conversion():
    obj = {"a": np.float64(0.5), "b": np.array([1, 2]), "c": (np.bool_(True), None),
           "d": math.inf, "e": -math.inf}
    assert to_plain(obj) == {"a": 0.5, "b": [1, 2], "c": [True, None], "d": "inf", "e": "-inf"}


def test_json_is_sorted_and_17_digit():
    text = dumps_json({"b": 0.1, "a": [1, 2.5]})
    assert text.index('"a"') < text.index('"b"')
    assert "0.10000000000000001" in text
    assert json.loads(text) == {"a": [1, 2.5], "b": 0.1}


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_roundtrip(x):
    back = json.loads(dumps_json({"x": x}))["x"]
    assert back == x


def test_report_layout_and_timing():
    r = Report("demo", {"f": "x1"}, {"tol": 1e-6}, checks={"ok": True},
               tables={"t": table(["x", "v"], [[0.0, math.inf]])})
    d = json.loads(dumps_json(r))
    assert d["passed"] is True and "wall_time_s" not in d
    assert set(d["versions"]) == {"gcoupling", "numpy"}
    r.wall_time = 1.5
    assert "wall_time_s" in json.loads(dumps_json(r))


def test_csv_tables():
    r = Report("demo", {}, {}, tables={"t": table(["x", "v"], [[0.1, math.inf]])})
    assert dumps_csv(r) == "table,x,v\nt,0.10000000000000001,inf\n"
    with pytest.raises(ValueError):
        dumps_csv(Report("empty", {}, {}))
