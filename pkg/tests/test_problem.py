import json

import numpy as np
import pytest

from gcoupling.problem import Problem, SchemaError, load_problem


def test_yaml_and_json_load_the_same(tmp_path):
    doc = {"dims": {"n": 1, "m": 1}, "f": "x1^2", "g": {"builtin": "square_product"}}
    (tmp_path / "p.json").write_text(json.dumps(doc))
    (tmp_path / "p.yaml").write_text("dims: {n: 1, m: 1}\nf: 'x1^2'\ng: {builtin: square_product}\n")
    a, b = load_problem(tmp_path / "p.json"), load_problem(tmp_path / "p.yaml")
    assert a.doc == b.doc
    assert a.f()(np.array([[3.0]]))[0] == 9.0


def test_overrides_and_defaults():
    P = Problem({"numeric": {"tol": 1e-3}}, overrides={"radius": 5.0, "seed": None})
    assert P.numeric.tol == 1e-3 and P.numeric.radius == 5.0 and P.numeric.seed == 0
    assert P.numeric.points_per_dim == 201


def test_expression_coupling_with_set():
    P = Problem({"dims": {"n": 1, "m": 1},
                 "g": {"expr": "(x1 * s1)^2", "C": {"kind": "orthant"}}})
    g = P.g()
    assert g(np.array([[2.0], [2.0]]), np.array([[1.0], [-1.0]])).tolist() == [4.0, np.inf]


def test_builtin_parameters_are_resolved():
    P = Problem({"dims": {"n": 2}, "f": "x1^2 + x2^2",
                 "g": {"builtin": "cone_inner", "params": {"K": "orthant"}}})
    assert P.g().C.kind == "orthant" and P.g().n == 2
    P = Problem({"f": {"expr": "x1", "dom": {"kind": "box", "lo": [0], "hi": [1]}},
                 "g": "norm_on_dom"})
    assert P.g().name == "norm_on_dom"


def test_grid_sections():
    P = Problem({"grids": {"x": {"lo": -1, "hi": 3, "points": 5}}})
    g = P.grid("x", 1)
    assert g.box.lo == (-1.0,) and g.points_per_dim == 5
    assert P.grid("c", 1, default_radius=2.0).box.hi == (2.0,)


@pytest.mark.parametrize("doc,path", [
    ({"f": "x1 +"}, "f.expr"),
    ({"f": {"dom": "orthant"}}, "f.expr"),
    ({"f": "x1", "g": {"builtin": "nope"}}, "g.builtin"),
    ({"f": "x1", "g": {"builtin": "cone_inner", "params": {"K": {"kind": "blob"}}}}, "g.params.K"),
    ({"f": "x1", "g": {"expr": "x1 + s1"}}, "g.C"),
    ({"numeric": {"bogus": 1}}, "numeric"),
])
def test_schema_errors_carry_paths(doc, path):
    with pytest.raises(SchemaError) as info:
        P = Problem(doc)
        P.g(P.f())
    assert info.value.path == path


def test_unparsable_file(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("dims: [unclosed\n")
    with pytest.raises(SchemaError):
        load_problem(bad)
