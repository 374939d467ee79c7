import json
from pathlib import Path

import pytest

from gcoupling.cli import list_builtins, main

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list_builtins(capsys):
    code, out, _ = run(capsys, "list-builtins")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 9
    assert any(l.startswith("cone_inner") and "ZDGP lemma" in l for l in lines)
    assert any(l.startswith("ik_shifted") and "ZDGP proposition" in l for l in lines)
    assert out == list_builtins()


def test_conjugate_example1(capsys):
    code, out, _ = run(capsys, "conjugate", PROBLEMS / "example1.yaml")
    rep = json.loads(out)
    assert code == 0 and rep["checks"]["fg_matches_reference"]
    rows = rep["tables"]["fg"]["rows"]
    assert all((abs(r[1]) <= 1e-6) if abs(r[0]) <= 1 else (r[1] == "inf") for r in rows)
    assert rep["numeric"]["tol"] == 1e-6


def test_cp_lcp_file(capsys, tmp_path):
    out_file = tmp_path / "r.json"
    code, _, _ = run(capsys, "cp", PROBLEMS / "lcp.yaml", "--out", out_file)
    rep = json.loads(out_file.read_text())
    assert code == 0
    assert rep["results"]["lcp"]["exact"] == ["1/3", "1/3"]
    assert rep["results"]["dual_inf_at_solution"] == 0


def test_flags_are_embedded(capsys):
    code, out, _ = run(capsys, "lagrangian", PROBLEMS / "lagrangian.yaml", "--points", "101",
                       "--radius", "5")
    rep = json.loads(out)
    assert code == 0
    assert rep["numeric"]["points_per_dim"] == 101 and rep["numeric"]["radius"] == 5


def test_failed_check_gives_exit_1(capsys, tmp_path):
    p = tmp_path / "p.yaml"
    p.write_text("f: 'x1^2'\ng: {builtin: square_product}\nexpect:\n"
                 "  conjugate: {membership.member: false}\n")
    code, _, err = run(capsys, "conjugate", p)
    assert code == 1 and "expect.membership.member" in err


def test_schema_error_exit_2(capsys, tmp_path):
    p = tmp_path / "p.yaml"
    p.write_text("f: 'x1 +'\ng: {builtin: exp}\n")
    code, _, err = run(capsys, "conjugate", p)
    assert code == 2 and "f.expr" in err


def test_csv_output(capsys):
    code, out, _ = run(capsys, "lagrangian", PROBLEMS / "lagrangian.yaml", "--format", "csv")
    assert code == 0 and out.startswith("table,l1,value\n")


def test_identical_inputs_give_identical_bytes(capsys):
    a = run(capsys, "ep", PROBLEMS / "ep.yaml")[1]
    b = run(capsys, "ep", PROBLEMS / "ep.yaml")[1]
    assert a == b


def test_timing_flag(capsys):
    _, out, _ = run(capsys, "validate", PROBLEMS / "validate_max_dot.yaml", "--timing")
    assert "wall_time_s" in json.loads(out)


@pytest.mark.parametrize("cmd,name", [
    ("conjugate", "example2"), ("conjugate", "example3"), ("duality", "example3_duality"),
    ("duality", "norm_on_dom"), ("validate", "validate_max_dot"), ("ep", "ep"),
    ("cp", "lcp_infeasible"), ("recession", "example1"),
])
def test_problem_files_pass(capsys, cmd, name):
    code, _, err = run(capsys, cmd, PROBLEMS / f"{name}.yaml")
    assert code == 0, err
