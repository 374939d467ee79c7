"""One runner per CLI subcommand: Problem in, Report out.

Every runner records boolean ``checks`` (the exit status is their
conjunction), a ``results`` mapping and value ``tables``.  A problem file
may add an ``expect`` block, keyed by experiment name, whose entries are
compared with ``results`` (dotted keys reach into nested mappings).
Numbers match within the block's ``tol`` (default 1e-6), everything else
by equality.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .complementarity import (CPInstance, cp_check, cp_dual_closed_form, cp_dual_engine,
                              cp_zdgp_equivalence, lcp_enumerate)
from .conjugate import (GammaFn, closure_experiment, dual_attainment, duality_report,
                        g_biconjugate, g_conjugate, membership_Ff)
from .coupling import ProperFn, check_star_properties, pseudo_monotone_scan, validate_coupling
from .duality_schemes import (ConstrainedProblem, PerturbationScheme, classic_recovery_check,
                              hstar_table, lagrangian_dual_report, perturbation_report)
from .equilibrium import (EPInstance, EPVIPInstance, VIPInstance, ep_residual, epvip_gap,
                          jemlws_certificate, vip_gap, zdgp_check)
from .extreal import GridSpec
from .problem import Problem, SchemaError
from .recession import RecessionSetup, compactness_verdict
from .report import Report, table
from .sets import SetSpec

__all__ = ["RUNNERS", "run_experiment"]


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _new_report(name: str, P: Problem) -> Report:
    return Report(name, P.echo(), P.numeric.as_dict())


def _points(spec, dim: int, path: str) -> np.ndarray:
    """A list of points, or ``{lo, hi, step}`` for a regular lattice."""
    if isinstance(spec, dict):
        try:
            lo = np.broadcast_to(np.asarray(spec["lo"], float), (dim,))
            hi = np.broadcast_to(np.asarray(spec["hi"], float), (dim,))
            step = float(spec["step"])
        except KeyError as exc:
            raise SchemaError(path, f"missing {exc.args[0]!r}") from None
        axes = [a + step * np.arange(int(round((b - a) / step)) + 1) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 1 and dim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise SchemaError(path, f"expected a list of points of dimension {dim}")
    return arr


def _vector_expr(P: Problem, texts, groups, path: str, dim: int) -> Callable:
    if isinstance(texts, str):
        texts = [texts]
    if len(texts) != dim:
        raise SchemaError(path, f"expected {dim} component expressions")
    comps = [P.expr(t, groups, f"{path}[{i}]") for i, t in enumerate(texts)]

    def fn(*arrays):
        vals = [np.asarray(c(*arrays), dtype=float) for c in comps]
        vals = np.broadcast_arrays(*vals)
        return np.stack(vals, axis=-1)

    return fn


def _close(a, b, tol: float) -> bool:
    if isinstance(a, bool) or isinstance(b, bool) or a is None or b is None:
        return a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if math.isinf(a) or math.isinf(b):
            return a == b
        return abs(a - b) <= tol
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_close(x, y, tol) for x, y in zip(a, b))
    return a == b


def _lookup(results: dict, dotted: str):
    cur = results
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise KeyError(dotted)
        cur = cur[part]
    return cur


def _apply_expect(P: Problem, rep: Report) -> None:
    exp = dict((P.doc.get("expect") or {}).get(rep.experiment) or {})
    tol = float(exp.pop("tol", 1e-6))
    for key, want in sorted(exp.items()):
        try:
            got = _lookup(rep.results, key)
        except KeyError:
            raise SchemaError(f"expect.{rep.experiment}.{key}", "no such result") from None
        if isinstance(want, str) and want in ("inf", "-inf"):
            want = float(want)
        rep.checks[f"expect.{key}"] = _close(got, want, tol)


def _sampled_table(fn, names: list[str], extra: Optional[dict] = None) -> dict:
    cols = names + ["value", "status", "widened"]
    rows = [list(p) + [v, s, w] for p, v, s, w in
            zip(fn.points.tolist(), fn.values.tolist(), fn.status.tolist(), fn.widened.tolist())]
    if extra:
        for k, vals in extra.items():
            cols.append(k)
            for r, v in zip(rows, vals):
                r.append(v)
    return table(cols, rows)


def _names(prefix: str, k: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(1, k + 1)]


def _xgrid(P: Problem) -> GridSpec:
    return P.grid("x", P.n)


def _cgrid(P: Problem, g) -> GridSpec:
    return P.grid("c", P.m, default_radius=2.0, default_points=41, default_rounds=0, region=g.C)


def _reference(P: Problem, key: str, values, points, groups, tol: float):
    """Compare ``values`` with a closed form from ``reference.<key>``."""
    ref = (P.doc.get("reference") or {})
    if key not in ref:
        return None, None
    spec = ref[key]
    if isinstance(spec, str):
        spec = {"expr": spec}
    fn = P.expr(spec["expr"], groups, f"reference.{key}.expr")
    want = np.broadcast_to(np.asarray(fn(points), dtype=float), values.shape)
    t = float(spec.get("tol", tol))
    both = np.isfinite(want) & np.isfinite(values)
    same_inf = (want == values) | both
    diff = float(np.max(np.abs(want[both] - values[both]))) if np.any(both) else 0.0
    return bool(np.all(same_inf) and diff <= t), diff


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

def run_validate(P: Problem) -> Report:
    rep = _new_report("validate", P)
    f = P.f() if "f" in P.doc else None
    g = P.g(f)
    sec = P.doc.get("validate") or {}
    xg = P.grid("x", P.n, default_radius=5.0, default_points=21, default_rounds=1)
    # a centered x*-box so that D1 sees points on both sides of C
    cg = P.grid("c", P.m, default_radius=5.0, default_points=21, default_rounds=1)
    joint = GridSpec(xg.box.product(cg.box), xg.points_per_dim, xg.refinement_rounds)
    v = validate_coupling(g, joint, P.numeric.tol, segments=int(sec.get("segments", 200)),
                          seed=P.numeric.seed)
    rep.results["validation"] = v.as_dict()
    rep.results["coupling"] = {"name": g.name, "C": g.C.to_dict()}
    rep.checks.update(D1=v.d1, D2=v.d2, D3_convexity=v.d3_convex, nonnegative=v.nonnegative)
    if sec.get("star"):
        s = check_star_properties(g, count=int(sec.get("samples", 1000)), seed=P.numeric.seed)
        rep.results["star"] = {**vars(s), "holds": s.holds}
    if sec.get("pseudo_monotone"):
        pm = pseudo_monotone_scan(g, tol=P.numeric.tol, seed=P.numeric.seed)
        rep.results["pseudo_monotone"] = {"pseudo_monotone": pm.pseudo_monotone,
                                          "null_on_samples": pm.null_on_samples,
                                          "max_g": pm.max_g}
    return rep


def run_conjugate(P: Problem) -> Report:
    rep = _new_report("conjugate", P)
    tol = P.numeric.tol
    f = P.f()
    g = P.g(f)
    xg, cg = _xgrid(P), _cgrid(P, g)
    fg = g_conjugate(f, g, cg, xg)
    bg = P.grid("biconjugate", P.n, default_radius=2.0, default_points=41, default_rounds=0)
    fgg = g_biconjugate(f, g, fg, bg)
    fvals = f(fgg.points)
    mem = membership_Ff(f, g, xg, cg, tol, fg=fg)
    rep.results.update(membership=mem.as_dict(), fg_proper=fg.is_proper(),
                       inf_fg=fg.min(), inf_fgg=fgg.min())
    rep.tables["fg"] = _sampled_table(fg, _names("s", P.m))
    rep.tables["fgg"] = table(_names("x", P.n) + ["value", "f"],
                              [list(p) + [v, w] for p, v, w in
                               zip(fgg.points.tolist(), fgg.values.tolist(), fvals.tolist())])
    rep.checks["fg_never_minus_inf"] = not bool(np.any(fg.values == -np.inf))
    rep.checks["fgg_below_f"] = bool(np.all(fgg.values <= fvals + tol))
    ok, diff = _reference(P, "fg", fg.values, fg.points, [("s", P.m)], tol)
    if ok is not None:
        rep.checks["fg_matches_reference"] = ok
        rep.results["fg_reference_max_diff"] = diff
    ok, diff = _reference(P, "fgg", fgg.values, fgg.points, [("x", P.n)], tol)
    if ok is not None:
        rep.checks["fgg_matches_reference"] = ok
        rep.results["fgg_reference_max_diff"] = diff
    return rep


def run_duality(P: Problem) -> Report:
    rep = _new_report("duality", P)
    tol = P.numeric.tol
    f = P.f()
    g = P.g(f)
    xg, cg = _xgrid(P), _cgrid(P, g)
    d = duality_report(f, g, xg, cg, tol)
    rep.results["duality"] = d
    if d["verdict"] != "not_member":
        rep.checks["duality_identities"] = d["verdict"] == "holds"
        rep.results["dual_attainment"] = dual_attainment(f, g, xg, cg, tol)
    if "closure" in P.doc:
        sec = P.section("closure")
        fk = P.expr(sec["f_k"], [("x", P.n), ("k", 0)], "closure.f_k")
        k_max = int(sec.get("k_max", 8))
        cl = closure_experiment(lambda k: ProperFn(P.n, lambda X, k=k: fk(X, k)),
                                lambda k: g, f, g, k_max, xg, cg, tol)
        rep.results["closure"] = cl
        rep.checks["closure"] = cl["verdict"] == "holds"
    return rep


def run_recession(P: Problem) -> Report:
    rep = _new_report("recession", P)
    tol = P.numeric.tol
    f = P.f()
    g = P.g(f)
    xg, cg = _xgrid(P), _cgrid(P, g)
    fg = g_conjugate(f, g, cg, xg)
    gamma = GammaFn(f, g, fg, xg)
    sec = P.doc.get("recession") or {}
    setup = RecessionSetup.default(
        P.n + P.m, work_radius=float(sec.get("work_radius", 2.0)),
        far_radius=float(sec.get("far_radius", 4096.0)),
        work_points=int(sec.get("work_points", 41)), far_points=int(sec.get("far_points", 801)),
        angular_tol=float(sec.get("angular_tol", 1.5)), tol=tol, seed=P.numeric.seed)
    v = compactness_verdict(gamma, setup)
    rep.results["recession"] = v
    for key in ("theorem_equivalence", "lemma_l1_inclusion", "lemma_lpt", "ladder_agrees",
                "prop1_ii"):
        rep.checks[key] = bool(v[key])
    return rep


def run_lagrangian(P: Problem) -> Report:
    rep = _new_report("lagrangian", P)
    tol = P.numeric.tol
    sec = P.section("lagrangian")
    f = P.f()
    cons = sec.get("constraints")
    if not cons:
        raise SchemaError("lagrangian.constraints", "at least one constraint is required")
    hs = [P.expr(c, [("x", P.n)], f"lagrangian.constraints[{i}]") for i, c in enumerate(cons)]
    hs = [lambda X, h=h: np.broadcast_to(np.asarray(h(X), float), X.shape[:-1]) for h in hs]
    p = ConstrainedProblem(f, hs, "problem")
    xg = _xgrid(P)
    lg = P.grid("lambda", p.m, default_points=1001, default_rounds=0,
                region=SetSpec.orthant(p.m), default_radius=10.0)
    r = lagrangian_dual_report(p, xg, lg, tol)
    mult, conj = r.pop("multipliers"), r.pop("conjugate")
    rep.results["lagrangian"] = r
    mult = [[v] for v in mult] if p.m == 1 else mult
    rep.tables["conjugate"] = table(_names("l", p.m) + ["value"],
                                    [list(a) + [b] for a, b in zip(mult, conj)])
    rep.checks.update(engine_matches_direct=r["engine_matches_direct"], no_gap=r["no_gap"])
    return rep


def run_perturb(P: Problem) -> Report:
    rep = _new_report("perturb", P)
    tol = P.numeric.tol
    sec = P.section("perturbation")
    p = int(sec.get("p", 1))
    phi = P.expr(_get_req(sec, "phi", "perturbation"), [("x", P.n), ("u", p)], "perturbation.phi")
    f = P.f() if "f" in P.doc else None
    s = PerturbationScheme(phi, P.n, p, f, str(sec["phi"]))
    xg = _xgrid(P)
    ug = P.grid("u", p, default_points=41, default_rounds=4)
    usg = P.grid("ustar", p, default_radius=2.0, default_points=21, default_rounds=0)
    hs = hstar_table(s, usg, ug, xg)
    r = perturbation_report(s, xg, ug, usg, tol, seed=P.numeric.seed, hstar=hs)
    hst = r.pop("hstar")
    rep.results["perturbation"] = r
    rep.tables["hstar"] = table(_names("v", p) + ["value", "status"],
                                [list(a) + [b, c] for a, c, b in
                                 zip(hst["points"], hst["status"], hst["values"])])
    rep.checks["weak_duality"] = r["weak_duality"]
    rep.checks["hstar_equals_phistar"] = r["hstar_equals_phistar"]
    if r["gap_nonnegative"] is not None:
        rep.checks["gap_nonnegative"] = r["gap_nonnegative"]
    if r["no_gap"] and sec.get("classic", True):
        c = classic_recovery_check(s, xg, ug, usg, tol, hstar=hs)
        rep.results["classic_recovery"] = c
        rep.checks["classic_recovery"] = c["verdict"] == "holds"
    return rep


def _get_req(sec: dict, key: str, path: str):
    if key not in sec:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return sec[key]


def run_ep(P: Problem) -> Report:
    rep = _new_report("ep", P)
    tol = P.numeric.tol
    n = P.n
    if "ep" in P.doc:
        sec = P.section("ep")
        K = P.setspec(_get_req(sec, "K", "ep"), "ep.K", n)
        fxy = P.expr(_get_req(sec, "f", "ep"), [("x", n), ("y", n)], "ep.f")
        inst = EPInstance(K, fxy, str(sec["f"]))
        yg = P.grid("y", n, region=K, default_points=201)
        radius = float(sec.get("dual_radius", 4.0))
        c_points = int(sec.get("dual_points", 41))
        sweep = _points(sec.get("sweep", {"lo": K.bounding_box(1).lo_array.tolist(),
                                          "hi": K.bounding_box(1).hi_array.tolist(),
                                          "step": 0.05}), n, "ep.sweep")
        sweep = sweep[K.contains(sweep)]
        rows, consistent = [], True
        for x in sweep:
            res = ep_residual(inst, x, yg)
            cert = jemlws_certificate(inst, x, ygrid=yg, tol=tol, radius=radius,
                                      c_points=c_points)
            ok = (cert["status"] == "certified") == (res >= -tol)
            consistent &= ok
            rows.append(list(x) + [res, cert["status"] == "certified",
                                   cert["xstar"] if cert["xstar"] is None else list(cert["xstar"])])
        rep.tables["sweep"] = table(_names("x", n) + ["residual", "certified", "xstar"], rows)
        rep.checks["certificate_iff_solution"] = bool(consistent)
        F = np.array([r[:n] for r in rows if r[n] > -math.inf])
        zs = _points(sec["zdgp_points"], n, "ep.zdgp_points") if "zdgp_points" in sec else F
        out = {}
        for name in ("cone_inner", "ik_shifted"):
            z = zdgp_check(inst, name, zs, yg, None, float(sec.get("zdgp_tol", 1e-4)),
                           radius=radius, c_points=c_points)
            out[name] = z
            rep.checks[f"zdgp_{name}"] = z["verdict"] == "holds"
        rep.results["zdgp"] = out
        rep.results["solutions"] = [r[:n] for r in rows if r[n] >= -tol]
    if "vip" in P.doc:
        sec = P.section("vip")
        C = P.setspec(_get_req(sec, "C", "vip"), "vip.C", n)
        grid = P.grid("vip_sample", n, region=C, default_radius=1.0, default_points=201)
        vip = VIPInstance.on_grid(C, _get_req(sec, "M", "vip"), _get_req(sec, "q", "vip"), grid)
        X = _points(_get_req(sec, "points", "vip"), n, "vip.points")
        gaps = np.atleast_1d(vip_gap(vip, X))
        rep.tables["vip_gap"] = table(_names("x", n) + ["gap"],
                                      [list(x) + [v] for x, v in zip(X.tolist(), gaps.tolist())])
        rep.checks["vip_monotone_on_sample"] = vip.monotone_on_sample(tol, seed=P.numeric.seed)
        rep.checks["vip_gap_nonnegative"] = bool(np.all(gaps >= -tol))
    if "epvip" in P.doc:
        sec = P.section("epvip")
        Fm = _vector_expr(P, _get_req(sec, "F", "epvip"), [("x", n)], "epvip.F", n)
        eta = _vector_expr(P, _get_req(sec, "eta", "epvip"), [("y", n), ("x", n)], "epvip.eta", n)
        fe = P.f("epvip_f") if "epvip_f" in P.doc else P.f()
        inst = EPVIPInstance(Fm, eta, fe)
        yg = P.grid("epvip_y", n, default_points=201)
        X = _points(_get_req(sec, "points", "epvip"), n, "epvip.points")
        gaps = [epvip_gap(inst, x, yg) for x in X]
        rep.tables["epvip_gap"] = table(_names("x", n) + ["gap"],
                                        [list(x) + [v] for x, v in zip(X.tolist(), gaps)])
        rep.checks["epvip_gap_nonpositive"] = all(v <= tol for v in gaps)
    if not rep.tables:
        raise SchemaError("", "an ep file needs an ep, vip or epvip section")
    return rep


def run_cp(P: Problem) -> Report:
    rep = _new_report("cp", P)
    tol = P.numeric.tol
    sec = P.section("cp")
    K = P.setspec(sec["K"], "cp.K") if "K" in sec else None
    try:
        inst = CPInstance(_get_req(sec, "M", "cp"), _get_req(sec, "q", "cp"), K)
    except ValueError as exc:
        raise SchemaError("cp", str(exc)) from None
    n = inst.n
    orthant = K is None or K.to_dict() == SetSpec.orthant(n).to_dict()
    sol = None
    if orthant:
        res = lcp_enumerate(inst.M, inst.q)
        sol = res.as_floats()
        rep.results["lcp"] = {"solution": sol, "exact": None if sol is None else
                              [str(v) for v in res.solution],
                              "active_set": None if sol is None else list(res.active_set)}
        if sol is not None:
            rep.checks["solution_is_cp"] = cp_check(inst, sol, 1e-12)
    radius = float(sec.get("radius", 4.0))
    yg = GridSpec(K.bounding_box(radius) if K is not None else SetSpec.orthant(n).bounding_box(radius),
                  int(sec.get("y_points", 21)), int(sec.get("y_rounds", 2)))
    rng = np.random.default_rng(P.numeric.seed)
    pairs = int(sec.get("pairs", 100))
    if pairs:
        X = inst.K.grid_points(GridSpec(inst.K.bounding_box(2.0), 9, 0))
        X = X[rng.integers(len(X), size=pairs)]
        XS = inst.Kplus.grid_points(GridSpec(inst.Kplus.bounding_box(2.0), 9, 0))
        XS = XS[rng.integers(len(XS), size=pairs)]
        closed = np.array([cp_dual_closed_form(inst, x, s) for x, s in zip(X, XS)])
        engine = np.array([cp_dual_engine(inst, x, s[None, :], yg)[0] for x, s in zip(X, XS)])
        both = np.isfinite(closed) & np.isfinite(engine)
        diff = float(np.max(np.abs(closed[both] - engine[both]))) if np.any(both) else 0.0
        same = bool(np.all(both | (closed == engine)))
        rep.results["dual_closed_form_max_diff"] = diff if same else math.inf
        rep.checks["dual_closed_form_matches_engine"] = same and diff <= tol
    pts = _points(sec.get("points", {"lo": 0.0, "hi": 2.0, "step": 0.25}), n, "cp.points")
    if sol is not None:
        pts = np.vstack([pts, np.asarray(sol)[None, :]])
    eq = cp_zdgp_equivalence(inst, pts, tol=tol, radius=radius)
    rep.tables["equivalence"] = table(
        _names("x", n) + ["in_F", "T_in_Kplus", "dual_inf", "solution"],
        [r["x"] + [r["in_F"], r["T_in_Kplus"], r.get("dual_inf"), r.get("solution")]
         for r in eq["rows"]])
    rep.results["F_matches"] = eq["F_matches"]
    rep.results["dual_matches"] = eq["dual_matches"]
    if sol is not None:
        row = eq["rows"][-1]
        rep.results["dual_inf_at_solution"] = row.get("dual_inf")
    rep.checks["F_matches"] = eq["F_matches"]
    rep.checks["dual_matches"] = eq["dual_matches"]
    return rep


RUNNERS = {
    "validate": run_validate,
    "conjugate": run_conjugate,
    "duality": run_duality,
    "recession": run_recession,
    "lagrangian": run_lagrangian,
    "perturb": run_perturb,
    "ep": run_ep,
    "cp": run_cp,
}


def run_experiment(cmd: str, P: Problem) -> Report:
    """Dispatch ``cmd`` on a loaded problem and apply its ``expect`` block."""
    if cmd not in RUNNERS:
        raise ValueError(f"unknown experiment {cmd!r}")
    rep = RUNNERS[cmd](P)
    _apply_expect(P, rep)
    return rep
