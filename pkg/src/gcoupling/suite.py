"""Regression suite over the closed-form worked examples.

Each check recomputes a published value with the library and compares it
with the closed form.  ``run_suite`` returns a Report whose ``table`` lists
one pass/fail row per check.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np

from .complementarity import (CPInstance, cp_dual_closed_form, cp_dual_engine,
                              cp_zdgp_equivalence, lcp_enumerate)
from .conjugate import (GammaFn, dual_attainment, duality_report, g_biconjugate,
                        g_conjugate, membership_Ff)
from .coupling import BUILTINS, ProperFn, builtin_coupling, validate_coupling
from .duality_schemes import (ConstrainedProblem, PerturbationScheme, lagrangian_dual_report,
                              perturbation_report)
from .equilibrium import EPInstance, ep_residual, jemlws_certificate, zdgp_check
from .extreal import DEFAULT_TOL, Box, GridSpec
from .recession import RecessionSetup, compactness_verdict, recession_directions
from .report import Report, table
from .sets import SetSpec

__all__ = ["CHECKS", "run_suite"]

XGRID = GridSpec.centered(20.0, 1, 201)
CGRID = GridSpec.centered(2.0, 1, 41)


def _sq(X):
    return X[..., 0] ** 2


@lru_cache(maxsize=None)
def _example(k: int):
    """(f, g, C-grid) of the three worked examples and the norm construction."""
    if k == 1:
        return ProperFn(1, _sq, name="x^2"), builtin_coupling("square_product"), CGRID
    if k == 2:
        f = ProperFn(1, _sq, SetSpec.orthant(1), name="x^2 on x >= 0")
        return f, builtin_coupling("reciprocal"), GridSpec.on([0.0], [4.0], 41, 0)
    if k == 3:
        return ProperFn(1, lambda X: np.exp(X[..., 0]), name="exp"), builtin_coupling("exp"), CGRID
    f = ProperFn(1, _sq, name="x^2")
    return f, builtin_coupling("norm_on_dom", dom=f, m=1), CGRID


def _inf_consistent(values, want) -> bool:
    return bool(np.all((values == np.inf) == (want == np.inf)))


def check_example1_conjugate():
    f, g, _ = _example(1)
    cg = GridSpec.centered(2.0, 1, 201)
    fg = g_conjugate(f, g, cg, XGRID)
    s = fg.points[:, 0]
    want = np.where(np.abs(s) <= 1, 0.0, np.inf)
    fin = np.isfinite(want)
    diff = float(np.max(np.abs(fg.values[fin])))
    return _inf_consistent(fg.values, want) and diff <= 1e-6, {"max_diff_finite": diff}


def check_example1_biconjugate():
    f, g, cg = _example(1)
    fg = g_conjugate(f, g, cg, XGRID)
    fgg = g_biconjugate(f, g, fg, GridSpec.centered(2.0, 1, 41, 0))
    diff = float(np.max(np.abs(fgg.values - fgg.points[:, 0] ** 2)))
    return diff <= 1e-4, {"max_diff": diff}


def check_example2_not_member():
    f, g, cg = _example(2)
    fg = g_conjugate(f, g, cg, XGRID)
    diff = float(np.max(np.abs(fg.values - 1.0)))
    mem = membership_Ff(f, g, XGRID, cg, DEFAULT_TOL, fg=fg)
    ok = diff <= 1e-3 and not mem.member and abs(mem.inf_gamma - 1.0) <= 1e-3
    return ok, {"fg_max_diff": diff, "member": mem.member, "inf_gamma": mem.inf_gamma}


def check_example3():
    f, g, cg = _example(3)
    fg = g_conjugate(f, g, cg, XGRID)
    s = fg.points[:, 0]
    want = np.where(s <= 0, 0.0, np.inf)
    fin = np.isfinite(want)
    diff = float(np.max(np.abs(fg.values[fin])))
    mem = membership_Ff(f, g, XGRID, cg, DEFAULT_TOL, fg=fg)
    att = dual_attainment(f, g, XGRID, cg, DEFAULT_TOL, fg=fg)
    ok = (_inf_consistent(fg.values, want) and diff <= 1e-6 and mem.member
          and att["status"] == "solved" and abs(att["xstar"][0]) <= 1e-12)
    return ok, {"max_diff_finite": diff, "member": mem.member, "dual_xstar": att["xstar"]}


def check_norm_on_dom():
    f, g, cg = _example(4)
    fg = g_conjugate(f, g, cg, XGRID)
    diff = float(np.max(np.abs(fg.values - np.abs(fg.points[:, 0]))))
    mem = membership_Ff(f, g, XGRID, cg, DEFAULT_TOL, fg=fg)
    return diff <= 1e-12 and mem.member, {"max_diff": diff, "member": mem.member}


def check_duality_identities():
    verdicts = {}
    for k in (1, 3, 4):
        f, g, cg = _example(k)
        verdicts[g.name] = duality_report(f, g, XGRID, cg, DEFAULT_TOL)["verdict"]
    return all(v == "holds" for v in verdicts.values()), verdicts


def _gamma(k: int) -> GammaFn:
    f, g, cg = _example(k)
    return GammaFn(f, g, g_conjugate(f, g, cg, XGRID), XGRID)


_RECESSION_KEYS = ("theorem_equivalence", "lemma_l1_inclusion", "lemma_lpt", "ladder_agrees")


def check_recession_example1():
    v = compactness_verdict(_gamma(1), RecessionSetup.default(2))
    ok = v["R_is_zero"] and v["m_compact"] and all(v[k] for k in _RECESSION_KEYS)
    return ok, {k: v[k] for k in ("R_is_zero", "m_compact") + _RECESSION_KEYS}


def check_recession_example3():
    v = compactness_verdict(_gamma(3), RecessionSetup.default(2))
    quadrant = SetSpec.halfspaces([[-1.0, 0.0], [0.0, -1.0]], [0.0, 0.0])
    close = v["R"]["count"] > 1 and _R_hausdorff(v, recession_directions(quadrant)) <= 1.5
    ok = (not v["R_is_zero"]) and (not v["m_nonempty"]) and close \
        and all(v[k] for k in _RECESSION_KEYS)
    return ok, {k: v[k] for k in ("R_is_zero", "m_nonempty") + _RECESSION_KEYS}


def _R_hausdorff(v: dict, exact) -> float:
    # rebuild the direction set from its angles to compare with the exact cone
    ang = np.radians(np.asarray(v["R"]["angles_deg"], dtype=float))
    units = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    ref = exact.directions
    d = np.degrees(np.arccos(np.clip(units @ ref.T, -1, 1)))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def check_lagrangian_bridge():
    p = ConstrainedProblem(ProperFn(1, _sq), [lambda X: 1.0 - X[..., 0]])
    r = lagrangian_dual_report(p, XGRID, GridSpec.on([0.0], [10.0], 101, 0), 1e-4)
    ok = (abs(r["primal_value"] - 1) <= 1e-4 and abs(r["dual_value"] - 1) <= 1e-4
          and abs(r["gap"]) <= 1e-4 and r["engine_vs_direct_max_diff"] <= 1e-10)
    return ok, {k: r[k] for k in ("primal_value", "dual_value", "gap", "engine_vs_direct_max_diff")}


def check_perturbation_schemes():
    f = ProperFn(1, _sq)
    schemes = {
        "shift": lambda X, U: (X[..., 0] - U[..., 0]) ** 2,
        "linear": lambda X, U: X[..., 0] ** 2 + U[..., 0] * X[..., 0],
    }
    ug = GridSpec.centered(20.0, 1, 41, 4)
    usg = GridSpec.centered(2.0, 1, 21, 0)
    out, ok = {}, True
    for name, phi in schemes.items():
        r = perturbation_report(PerturbationScheme(phi, 1, 1, f, name), XGRID, ug, usg)
        out[name] = {"weak_duality": r["weak_duality"],
                     "hstar_phistar_max_diff": r["hstar_phistar_max_diff"]}
        ok &= r["weak_duality"] and r["hstar_phistar_max_diff"] <= 1e-6
    return ok, out


def _ep():
    return EPInstance(SetSpec.box([0.0], [1.0]),
                      lambda X, Y: (X[..., 0] - 0.5) * (Y[..., 0] - X[..., 0]))


def check_ep_certificate():
    inst = _ep()
    cert = jemlws_certificate(inst, [0.5])
    sweep_ok = True
    for xb in np.linspace(0.0, 1.0, 21):
        c = jemlws_certificate(inst, [xb])["status"] == "certified"
        sweep_ok &= c == (ep_residual(inst, [xb]) >= -1e-6)
    ok = cert["status"] == "certified" and cert["xstar"] == [0.0] and sweep_ok
    return ok, {"status": cert["status"], "xstar": cert["xstar"], "sweep_consistent": sweep_ok}


def check_ep_zdgp():
    inst = _ep()
    F = [[0.0], [0.5], [1.0]]
    out = {}
    for name in ("cone_inner", "ik_shifted"):
        z = zdgp_check(inst, name, F, tol=1e-4)
        out[name] = max(abs(r["sum"]) for r in z["rows"])
    return all(v <= 1e-4 for v in out.values()), {"max_abs_sum": out}


def check_lcp():
    res = lcp_enumerate([[2, 1], [1, 2]], [-1, -1])
    sol = res.as_floats()
    diff = max(abs(v - 1 / 3) for v in sol) if sol else math.inf
    none = not lcp_enumerate([[-1, 0], [0, -1]], [-1, -1]).found
    return diff <= 1e-12 and none, {"solution": sol, "infeasible_returns_none": none}


def check_cp_equivalence():
    inst = CPInstance([[2, 1], [1, 2]], [-1, -1])
    X = np.array([[a, b] for a in np.arange(0, 2.01, 0.25) for b in np.arange(0, 2.01, 0.25)]
                 + [[1 / 3, 1 / 3]])
    r = cp_zdgp_equivalence(inst, X)
    rng = np.random.default_rng(0)
    yg = GridSpec(SetSpec.orthant(2).bounding_box(4.0), 21, 2)
    worst = 0.0
    for _ in range(20):
        x = rng.integers(0, 9, size=2) / 4
        s = rng.integers(0, 9, size=2) / 4
        a = cp_dual_closed_form(inst, x, s)
        b = float(cp_dual_engine(inst, x, s[None, :], yg)[0])
        worst = max(worst, 0.0 if a == b else abs(a - b))
    ok = r["verdict"] == "holds" and worst <= 1e-6
    return ok, {"F_matches": r["F_matches"], "dual_matches": r["dual_matches"],
                "dual_closed_form_max_diff": worst,
                "dual_inf_at_solution": r["rows"][-1]["dual_inf"]}


def check_builtins_are_couplings():
    out = {}
    K = SetSpec.orthant(1)
    f = ProperFn(1, _sq)
    for name in sorted(BUILTINS):
        params = {"cone_inner": {"K": K}, "ik_shifted": {"K": K},
                  "norm_on_dom": {"dom": f}}.get(name, {})
        g = builtin_coupling(name, **params)
        grid = GridSpec(Box.centered(5.0, 2), 21, 1)
        out[name] = validate_coupling(g, grid).ok
    return all(out.values()), out


CHECKS: dict[str, Callable[[], tuple]] = {
    "example1_conjugate": check_example1_conjugate,
    "example1_biconjugate": check_example1_biconjugate,
    "example2_not_member": check_example2_not_member,
    "example3_conjugate_and_attainment": check_example3,
    "norm_on_dom_conjugate": check_norm_on_dom,
    "duality_identities": check_duality_identities,
    "recession_example1": check_recession_example1,
    "recession_example3": check_recession_example3,
    "lagrangian_bridge": check_lagrangian_bridge,
    "perturbation_schemes": check_perturbation_schemes,
    "ep_certificate": check_ep_certificate,
    "ep_zdgp": check_ep_zdgp,
    "lcp_enumeration": check_lcp,
    "cp_equivalence": check_cp_equivalence,
    "builtins_are_couplings": check_builtins_are_couplings,
}


def run_suite(numeric: dict, only=None) -> Report:
    """Run the checks (all, or the names in ``only``) into one Report."""
    rep = Report("paper-suite", {"checks": sorted(only or CHECKS)}, numeric)
    rows = []
    for name in CHECKS:
        if only and name not in only:
            continue
        ok, detail = CHECKS[name]()
        rep.checks[name] = bool(ok)
        rep.results[name] = detail
        rows.append([name, "pass" if ok else "fail"])
    rep.tables["suite"] = table(["check", "result"], rows)
    return rep
