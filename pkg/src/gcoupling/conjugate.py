"""G-conjugates, the gap function gamma and grid-based duality experiments.

Conjugates are materialized on explicit grids over C (:class:`SampledFn`)
so that every downstream quantity reuses the same values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .coupling import CouplingFn, ProperFn
from .extreal import (
    DEFAULT_TOL,
    GridSpec,
    ext_add_upper,
    ext_sub_lower_array,
    optimize_many,
    optimize_over_grid,
)
from .sets import SetSpec

__all__ = [
    "SampledFn",
    "GammaFn",
    "MembershipVerdict",
    "g_conjugate",
    "g_conjugate_at",
    "g_biconjugate",
    "biconjugate_at",
    "gamma_eval",
    "membership_Ff",
    "duality_report",
    "dual_attainment",
    "closure_experiment",
    "primal_inf",
]

_BLOCK = 2_000_000


@dataclass
class SampledFn:
    """Values of an extended-real function at explicit points.

    ``status[i]`` is the status of the inner optimization that produced
    ``values[i]`` (``attained``, ``divergent`` or ``empty-domain``) and
    ``widened[i]`` flags suprema approached only at the edge of the box.
    """

    points: np.ndarray
    values: np.ndarray
    status: np.ndarray
    domain: SetSpec
    grid: GridSpec
    widened: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.widened is None:
            self.widened = np.zeros(len(self.values), dtype=bool)

    def __len__(self):
        return len(self.values)

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    def is_proper(self) -> bool:
        return bool(np.any(self.finite) and not np.any(self.values == -np.inf))

    def argmin(self, tol: float = 0.0) -> int:
        """Index of the smallest value.

        With ``tol > 0`` every point within ``tol`` of the minimum is a
        candidate and the one of least Euclidean norm wins (then the lowest
        index).
        """
        if not len(self.values):
            raise ValueError("empty sample")
        best = np.min(self.values)
        if tol <= 0 or not math.isfinite(best):
            return int(np.argmin(self.values))
        cand = np.flatnonzero(self.values <= best + tol)
        norms = np.linalg.norm(self.points[cand], axis=1)
        return int(cand[np.argmin(norms)])

    def min(self) -> float:
        return float(np.min(self.values)) if len(self.values) else math.inf

    def lookup(self, point, atol: float = 1e-12) -> Optional[int]:
        """Index of a sampled point equal to ``point`` (within ``atol``)."""
        p = np.asarray(point, dtype=float).reshape(-1)
        hit = np.flatnonzero(np.all(np.abs(self.points - p) <= atol, axis=1))
        return int(hit[0]) if hit.size else None


def primal_inf(f: ProperFn, xgrid: GridSpec):
    """Infimum of ``f`` over ``xgrid`` following improvements under widening."""
    return optimize_over_grid(f, xgrid, "inf", widen="follow")


def _c_points(g: CouplingFn, cgrid: GridSpec) -> np.ndarray:
    if cgrid.dim != g.m:
        raise ValueError(f"C-grid must have dimension m = {g.m}")
    pts = g.C.grid_points(cgrid)
    if not len(pts):
        raise ValueError("the C-grid has no point in C")
    return pts


def g_conjugate_at(f: ProperFn, g: CouplingFn, xstars, xgrid: GridSpec, *,
                   widen: str = "classify"):
    """f^g at each row of ``xstars``; returns the list of OptResults."""
    XS = np.atleast_2d(np.asarray(xstars, dtype=float))
    if xgrid.dim != g.n:
        raise ValueError(f"x-grid must have dimension n = {g.n}")
    in_c = g.C.contains(XS)

    def phi(P, rows):
        return ext_sub_lower_array(g(P, XS[rows][:, None, :]), f(P))

    lo = np.tile(xgrid.box.lo_array, (len(XS), 1))
    hi = np.tile(xgrid.box.hi_array, (len(XS), 1))
    results = optimize_many(phi, lo, hi, xgrid, "sup", widen=widen)
    for i in np.flatnonzero(~in_c):
        # off C the coupling is +inf, so is the conjugate
        results[i].value = math.inf
    return results


def g_conjugate(f: ProperFn, g: CouplingFn, cgrid: GridSpec, xgrid: GridSpec, *,
                widen: str = "classify") -> SampledFn:
    """f^g(x*) = sup_x g(x, x*) - f(x) at every point of ``cgrid`` lying in C.

    Examples
    --------
    >>> from gcoupling.coupling import builtin_coupling
    >>> f = ProperFn(1, lambda x: x[..., 0] ** 2)
    >>> fg = g_conjugate(f, builtin_coupling("square_product"),
    ...                  GridSpec.on([-2], [2], 5), GridSpec.on([-5], [5], 41))
    >>> fg.values.tolist()
    [inf, 0.0, 0.0, 0.0, inf]
    """
    XS = _c_points(g, cgrid)
    res = g_conjugate_at(f, g, XS, xgrid, widen=widen)
    return SampledFn(
        points=XS,
        values=np.array([r.value for r in res], dtype=float),
        status=np.array([r.status for r in res], dtype=object),
        domain=g.C,
        grid=cgrid,
        widened=np.array([r.widened for r in res], dtype=bool),
    )


def biconjugate_at(g: CouplingFn, fg: SampledFn, X) -> np.ndarray:
    """sup over the sampled x* of g(x, x*) - f^g(x*), for each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    keep = fg.values < math.inf
    XS, vals = fg.points[keep], fg.values[keep]
    out = np.full(len(X), -math.inf)
    if not len(XS):
        return out
    step = max(1, _BLOCK // len(XS))
    for s in range(0, len(X), step):
        blk = X[s:s + step]
        m = ext_sub_lower_array(g(blk[:, None, :], XS[None, :, :]), vals[None, :])
        out[s:s + step] = np.max(m, axis=1)
    return out


def g_biconjugate(f: ProperFn, g: CouplingFn, fg: SampledFn, xgrid: GridSpec) -> SampledFn:
    """f^gg on the nodes of ``xgrid``: a discrete sup over the C-grid of ``fg``.

    ``f`` is accepted for symmetry with :func:`g_conjugate` and is not
    evaluated.
    """
    X = xgrid.points()
    vals = biconjugate_at(g, fg, X)
    return SampledFn(X, vals, np.full(len(X), "attained", dtype=object),
                     SetSpec.full(g.n), xgrid)


class GammaFn:
    """gamma(x, x*) = f(x) + f^g(x*) on C, +inf off C.

    f^g is taken from ``fg`` when x* is one of its sample points and is
    otherwise computed on demand over ``xgrid`` and memoized.
    """

    def __init__(self, f: ProperFn, g: CouplingFn, fg: SampledFn, xgrid: GridSpec):
        self.f, self.g, self.fg, self.xgrid = f, g, fg, xgrid
        self._memo: dict[tuple, float] = {}

    def conjugate(self, xstar) -> float:
        key = tuple(np.asarray(xstar, dtype=float).reshape(-1).tolist())
        if key not in self._memo:
            i = self.fg.lookup(key)
            if i is not None:
                self._memo[key] = float(self.fg.values[i])
            else:
                self._memo[key] = g_conjugate_at(self.f, self.g, [key], self.xgrid)[0].value
        return self._memo[key]

    def conjugate_many(self, xstars) -> np.ndarray:
        """f^g at each row of ``xstars`` (+inf off C), batching missing values."""
        XS = np.atleast_2d(np.asarray(xstars, dtype=float))
        keys = [tuple(row.tolist()) for row in XS]
        for i, key in enumerate(keys):
            if key not in self._memo:
                j = self.fg.lookup(key)
                if j is not None:
                    self._memo[key] = float(self.fg.values[j])
        missing = [i for i, key in enumerate(keys) if key not in self._memo]
        if missing:
            res = g_conjugate_at(self.f, self.g, XS[missing], self.xgrid)
            for i, r in zip(missing, res):
                self._memo[keys[i]] = r.value
        vals = np.array([self._memo[k] for k in keys], dtype=float)
        return np.where(self.g.C.contains(XS), vals, np.inf)

    def __call__(self, x, xstar) -> float:
        xs = np.asarray(xstar, dtype=float).reshape(-1)
        if not self.g.C.contains(xs[None, :])[0]:
            return math.inf
        fx = float(self.f(np.asarray(x, dtype=float).reshape(1, -1))[0])
        return ext_add_upper(fx, self.conjugate(xs))


def gamma_eval(gamma: GammaFn, x, xstar) -> float:
    return gamma(x, xstar)


@dataclass
class MembershipVerdict:
    member: bool
    reason: Optional[str]
    inf_gamma: float
    inf_f: float
    inf_fg: float
    fg_proper: bool

    def as_dict(self) -> dict:
        return {"member": self.member, "reason": self.reason, "inf_gamma": self.inf_gamma,
                "inf_f": self.inf_f, "inf_fg": self.inf_fg, "fg_proper": self.fg_proper}


def membership_Ff(f: ProperFn, g: CouplingFn, xgrid: GridSpec, cgrid: GridSpec,
                  tol: float = DEFAULT_TOL, *, fg: Optional[SampledFn] = None,
                  f_inf=None) -> MembershipVerdict:
    """Decide whether f^g is proper and inf gamma = 0 on the grids.

    gamma is separable on R^n x C, so its infimum over the joint grid is
    inf f + inf f^g.
    """
    fg = g_conjugate(f, g, cgrid, xgrid) if fg is None else fg
    f_inf = primal_inf(f, xgrid) if f_inf is None else f_inf
    proper = fg.is_proper()
    inf_f, inf_fg = f_inf.value, fg.min()
    inf_gamma = ext_add_upper(inf_f, inf_fg)
    if not proper:
        reason = "f^g is not proper on the C-grid"
    elif inf_gamma < -tol:
        reason = f"gamma takes negative values (inf = {inf_gamma:.6g})"
    elif inf_gamma > tol:
        reason = f"inf gamma = {inf_gamma:.6g} > 0"
    else:
        reason = None
    return MembershipVerdict(reason is None, reason, float(inf_gamma), float(inf_f),
                             float(inf_fg), proper)


def duality_report(f: ProperFn, g: CouplingFn, xgrid: GridSpec, cgrid: GridSpec,
                   tol: float = DEFAULT_TOL) -> dict:
    """Primal/dual/bidual infima and the zero-gap checks.

    Membership is checked first; for non-members the report carries the
    diagnostics and no duality assertions.
    """
    fg = g_conjugate(f, g, cgrid, xgrid)
    f_inf = primal_inf(f, xgrid)
    mem = membership_Ff(f, g, xgrid, cgrid, tol, fg=fg, f_inf=f_inf)
    report = {"membership": mem.as_dict(), "inf_f": f_inf.value,
              "inf_f_attained": f_inf.attained and not f_inf.widened}
    if not mem.member:
        report["verdict"] = "not_member"
        return report
    fgg = g_biconjugate(f, g, fg, xgrid)
    inf_fg, inf_fgg = fg.min(), fgg.min()
    report.update(
        inf_fg=inf_fg,
        inf_fgg=inf_fgg,
        zero_gap=abs(f_inf.value + inf_fg) <= tol,
        inf_f_equals_inf_fgg=abs(f_inf.value - inf_fgg) <= tol,
        fgg_below_f=bool(np.all(fgg.values <= f(fgg.points) + tol)),
    )
    if report["inf_f_attained"]:
        x0 = f_inf.arg
        at_x0 = float(biconjugate_at(g, fg, x0)[0])
        report["minimizer"] = x0.tolist()
        report["minimizer_transfers"] = at_x0 - inf_fgg <= tol
    else:
        report["minimizer"] = None
        report["minimizer_transfers"] = None
    checks = [report["zero_gap"], report["inf_f_equals_inf_fgg"], report["fgg_below_f"]]
    if report["minimizer_transfers"] is not None:
        checks.append(report["minimizer_transfers"])
    report["verdict"] = "holds" if all(checks) else "fails"
    return report


def dual_attainment(f: ProperFn, g: CouplingFn, xgrid: GridSpec, cgrid: GridSpec,
                    tol: float = DEFAULT_TOL, *, fg: Optional[SampledFn] = None) -> dict:
    """Look for a solution of the dual problem inf f^g on the C-grid.

    Among near-optimal grid points the one of least norm is returned.  The
    dual counts as unattained when doubling the C-box lowers the infimum by
    more than ``tol``.  With l = f^g, the report also gives l(x*) + l*(0),
    where l*(0) = sup_x* -l(x*) is computed on the same grid.
    """
    fg = g_conjugate(f, g, cgrid, xgrid) if fg is None else fg
    inf_fg = fg.min()
    wide = g_conjugate(f, g, cgrid.with_box(cgrid.box.doubled()), xgrid)
    out = {"inf_fg": inf_fg, "relative_interior": "assumed"}
    if not math.isfinite(inf_fg) or wide.min() < inf_fg - tol:
        out.update(status="unattained", xstar=None, inf_fg_widened=wide.min())
        return out
    i = fg.argmin(tol)
    l_star_0 = -inf_fg
    out.update(status="solved", xstar=fg.points[i].tolist(), value=float(fg.values[i]),
               l_plus_lstar=float(fg.values[i] + l_star_0))
    return out


def _sup_distance(a: np.ndarray, b: np.ndarray) -> float:
    fa, fb = np.isfinite(a), np.isfinite(b)
    if np.any(fa != fb):
        # mismatched infinities; equal infinities count as distance 0
        same = (a == b)
        if np.any(~same & ~(fa & fb)):
            return math.inf
    both = fa & fb
    return float(np.max(np.abs(a[both] - b[both]))) if np.any(both) else 0.0


def closure_experiment(f_family: Callable[[int], ProperFn], g_family: Callable[[int], CouplingFn],
                       f: ProperFn, g: CouplingFn, k_max: int, xgrid: GridSpec,
                       cgrid: GridSpec, tol: float = DEFAULT_TOL) -> dict:
    """Check that the limit of member pairs (f_k, g_k) is again a member pair.

    Reports sup-distances of f_k to f and of g_k to g on the grids, the
    membership of every pair, the distance of f_k^{g_k} to f^g on the C-grid,
    and the membership of the limit.
    """
    X = xgrid.points()
    XS = _c_points(g, cgrid)
    f_vals = f(X)
    g_vals = g(X[:, None, :], XS[None, :, :])
    fg = g_conjugate(f, g, cgrid, xgrid)
    rows = []
    for k in range(1, k_max + 1):
        fk, gk = f_family(k), g_family(k)
        fgk = g_conjugate(fk, gk, cgrid, xgrid)
        mem = membership_Ff(fk, gk, xgrid, cgrid, tol, fg=fgk)
        rows.append({
            "k": k,
            "member": mem.member,
            "inf_gamma": mem.inf_gamma,
            "dist_f": _sup_distance(fk(X), f_vals),
            "dist_g": _sup_distance(gk(X[:, None, :], XS[None, :, :]), g_vals),
            "dist_conjugate": _sup_distance(fgk.values, fg.values),
        })
    failed = []
    if not all(r["member"] for r in rows):
        failed.append("some (f_k, g_k) is not a member pair")
    for key in ("dist_f", "dist_g"):
        seq = [r[key] for r in rows]
        if any(b > a + tol for a, b in zip(seq, seq[1:])):
            failed.append(f"{key} is not nonincreasing")
        if seq and seq[-1] > tol and not seq[-1] < seq[0]:
            failed.append(f"{key} does not decrease toward 0")
    limit = membership_Ff(f, g, xgrid, cgrid, tol, fg=fg)
    conj_ok = all(r["dist_conjugate"] <= r["dist_f"] + r["dist_g"] + tol for r in rows)
    return {
        "rows": rows,
        "hypotheses_hold": not failed,
        "failed_hypotheses": failed,
        "limit_member": limit.member,
        "limit_inf_gamma": limit.inf_gamma,
        "conjugates_converge": conj_ok,
        "verdict": "holds" if (not failed and limit.member and conj_ok) else "fails",
    }
