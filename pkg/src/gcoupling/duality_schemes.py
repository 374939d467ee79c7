"""Perturbation duality, the Lagrangian coupling and classic-duality recovery.

A perturbation scheme is a function phi(x, u) with phi(x, 0) = f(x).  The
marginal function h(u) = inf_x phi(x, u) and its classical conjugate h* are
computed with the grid engine; h(u) is itself an inner optimization, so h*
is a nested grid search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .conjugate import SampledFn, g_conjugate, membership_Ff, primal_inf
from .coupling import CouplingFn, ProperFn, builtin_coupling
from .extreal import DEFAULT_TOL, GridSpec, ext_sub_lower_array, optimize_many
from .sets import SetSpec

__all__ = [
    "PerturbationScheme",
    "ConstrainedProblem",
    "marginal",
    "marginal_conjugate",
    "perturbation_conjugate_at_zero",
    "perturbation_report",
    "lagrangian_coupling",
    "lagrangian_dual_report",
    "classic_recovery_check",
    "hstar_table",
    "lagrangian_direct",
]


@dataclass
class PerturbationScheme:
    """phi : R^n x R^p -> extended reals, vectorized as ``phi(X, U)``."""

    phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    n: int
    p: int
    f: Optional[ProperFn] = None
    name: str = "scheme"

    def __call__(self, X, U) -> np.ndarray:
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return np.asarray(self.phi(np.asarray(X, float), np.asarray(U, float)), dtype=float)

    def primal(self) -> ProperFn:
        """f(x) = phi(x, 0)."""
        if self.f is not None:
            return self.f
        zero = np.zeros(self.p)
        return ProperFn(self.n, lambda X: self.phi(X, np.broadcast_to(zero, X.shape[:-1] + (self.p,))),
                        name=f"{self.name}(x, 0)")

    def check_consistency(self, xgrid: GridSpec, tol: float = DEFAULT_TOL) -> bool:
        if self.f is None:
            return True
        X = xgrid.points()
        a = self(X, np.zeros((len(X), self.p)))
        b = self.f(X)
        same_inf = (a == b) & ~np.isfinite(a)
        with np.errstate(invalid="ignore"):
            close = np.abs(a - b) <= tol * (1 + np.abs(b))
        return bool(np.all(same_inf | close))


def marginal(s: PerturbationScheme, U, xgrid: GridSpec) -> np.ndarray:
    """h(u) = inf_x phi(x, u) at each row of ``U`` (improvements followed)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if not len(U):
        return np.zeros(0)

    def obj(P, rows):
        return s(P, U[rows][:, None, :])

    lo = np.tile(xgrid.box.lo_array, (len(U), 1))
    hi = np.tile(xgrid.box.hi_array, (len(U), 1))
    return np.array([r.value for r in optimize_many(obj, lo, hi, xgrid, "inf", widen="follow")])


def marginal_conjugate(s: PerturbationScheme, ustars, ugrid: GridSpec,
                       xgrid: GridSpec) -> list:
    """h*(u*) = sup_u <u*, u> - h(u) for each row of ``ustars``."""
    US = np.atleast_2d(np.asarray(ustars, dtype=float))

    def obj(P, rows):
        k, mpts, p = P.shape
        h = marginal(s, P.reshape(-1, p), xgrid).reshape(k, mpts)
        lin = np.sum(US[rows][:, None, :] * P, axis=-1)
        return ext_sub_lower_array(lin, h)

    lo = np.tile(ugrid.box.lo_array, (len(US), 1))
    hi = np.tile(ugrid.box.hi_array, (len(US), 1))
    return optimize_many(obj, lo, hi, ugrid, "sup", widen="classify")


def perturbation_conjugate_at_zero(s: PerturbationScheme, ustars, jgrid: GridSpec) -> list:
    """phi*(0, u*) = sup_{x,u} <u*, u> - phi(x, u) on a joint (x, u) grid."""
    US = np.atleast_2d(np.asarray(ustars, dtype=float))
    n = s.n

    def obj(P, rows):
        X, U = P[..., :n], P[..., n:]
        lin = np.sum(US[rows][:, None, :] * U, axis=-1)
        return ext_sub_lower_array(lin, s(X, U))

    lo = np.tile(jgrid.box.lo_array, (len(US), 1))
    hi = np.tile(jgrid.box.hi_array, (len(US), 1))
    return optimize_many(obj, lo, hi, jgrid, "sup", widen="classify")


def _agree(a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    same = a == b
    with np.errstate(invalid="ignore"):
        close = np.abs(a - b) <= tol
    return same | close


def hstar_table(s: PerturbationScheme, ustar_grid: GridSpec, ugrid: GridSpec,
                xgrid: GridSpec) -> SampledFn:
    """h* tabulated at the nodes of ``ustar_grid``."""
    US = ustar_grid.points()
    res = marginal_conjugate(s, US, ugrid, xgrid)
    return SampledFn(US, np.array([r.value for r in res]),
                     np.array([r.status for r in res], dtype=object),
                     SetSpec.full(s.p), ustar_grid,
                     np.array([r.widened for r in res], dtype=bool))


def perturbation_report(s: PerturbationScheme, xgrid: GridSpec, ugrid: GridSpec,
                        ustar_grid: GridSpec, tol: float = DEFAULT_TOL, *,
                        samples: int = 200, seed: int = 0,
                        hstar: Optional[SampledFn] = None) -> dict:
    """alpha, beta, weak duality, the gap f(x) + h*(u*) and h* = phi*(0, .).

    ``xgrid`` and ``ugrid`` drive the inner and outer searches, ``ustar_grid``
    is where h* is tabulated.
    """
    if not s.check_consistency(xgrid, tol):
        raise ValueError("phi(x, 0) differs from the declared f")
    f = s.primal()
    alpha = float(marginal(s, np.zeros((1, s.p)), xgrid)[0])
    hs = hstar_table(s, ustar_grid, ugrid, xgrid) if hstar is None else hstar
    beta = hs.min()
    weak = -beta <= alpha + tol
    no_gap = math.isfinite(alpha) and math.isfinite(beta) and abs(alpha + beta) <= tol

    jgrid = GridSpec(xgrid.box.product(ugrid.box), ugrid.points_per_dim, ugrid.refinement_rounds)
    phis = np.array([r.value for r in perturbation_conjugate_at_zero(s, hs.points, jgrid)])
    agree = _agree(hs.values, phis, tol)

    report = {
        "alpha": alpha,
        "beta": beta,
        "weak_duality": bool(weak),
        "no_gap": bool(no_gap),
        "hstar": {"points": hs.points.tolist(), "values": hs.values.tolist(),
                  "status": hs.status.tolist()},
        "hstar_phistar_max_diff": _max_diff(hs.values, phis),
        "hstar_equals_phistar": bool(np.all(agree)),
    }
    if no_gap:
        rng = np.random.default_rng(seed)
        X = xgrid.points()
        i = rng.integers(len(X), size=samples)
        j = rng.integers(len(hs), size=samples)
        gap = f(X[i]) + hs.values[j]
        with np.errstate(invalid="ignore"):
            report["gap_nonnegative"] = bool(np.all(np.isnan(gap) | (gap >= -tol)))
    else:
        report["gap_nonnegative"] = None
    report["verdict"] = "holds" if (weak and report["hstar_equals_phistar"]
                                    and report["gap_nonnegative"] is not False) else "fails"
    return report


def _max_diff(a, b) -> float:
    """Largest |a - b| over entries finite in both; inf if infinities differ."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    both = np.isfinite(a) & np.isfinite(b)
    if np.any(~both & (a != b)):
        return math.inf
    return float(np.max(np.abs(a[both] - b[both]))) if np.any(both) else 0.0


# ---------------------------------------------------------------------------
# Lagrangian duality
# ---------------------------------------------------------------------------

@dataclass
class ConstrainedProblem:
    """min f(x) subject to h_i(x) <= 0 for every i."""

    f: ProperFn
    constraints: Sequence[Callable[[np.ndarray], np.ndarray]]
    name: str = "problem"

    @property
    def n(self) -> int:
        return self.f.n

    @property
    def m(self) -> int:
        return len(self.constraints)

    def h(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            cols = [np.broadcast_to(np.asarray(c(X), float), X.shape[:-1]) for c in self.constraints]
        return np.stack(cols, axis=-1) if cols else np.zeros(X.shape[:-1] + (0,))

    def feasible(self, X) -> np.ndarray:
        return np.all(self.h(X) <= 0, axis=-1)

    def restricted(self) -> ProperFn:
        """f-bar: f on A and +inf off A."""
        return ProperFn(self.n, lambda X: np.where(self.feasible(X), self.f(X), np.inf),
                        name=f"{self.name} restricted")


def lagrangian_coupling(p: ConstrainedProblem) -> CouplingFn:
    """g(x, lambda*) = g1(-h(x), lambda*)."""
    g1 = builtin_coupling("lagrangian_g1", m=p.m)
    return CouplingFn(p.n, p.m, lambda X, L: g1(-p.h(X), L), g1.C, "lagrangian",
                      {"m": p.m})


def lagrangian_direct(p: ConstrainedProblem, lambdas, xgrid: GridSpec) -> np.ndarray:
    """sup over x in A of <lambda*, -h(x)> - f(x), on the same x-grid."""
    L = np.atleast_2d(np.asarray(lambdas, dtype=float))

    def obj(P, rows):
        val = np.sum(L[rows][:, None, :] * -p.h(P), axis=-1) - p.f(P)
        return np.where(p.feasible(P), val, -np.inf)

    lo = np.tile(xgrid.box.lo_array, (len(L), 1))
    hi = np.tile(xgrid.box.hi_array, (len(L), 1))
    return np.array([r.value for r in optimize_many(obj, lo, hi, xgrid, "sup")])


def lagrangian_dual_report(p: ConstrainedProblem, xgrid: GridSpec, lgrid: GridSpec,
                           tol: float = DEFAULT_TOL) -> dict:
    """Conjugate of f-bar under the Lagrangian coupling vs the direct formula."""
    fbar = p.restricted()
    X = xgrid.points()
    if not np.any(p.feasible(X)):
        raise ValueError("the feasible set has no point on the x-grid")
    g = lagrangian_coupling(p)
    fg = g_conjugate(fbar, g, lgrid, xgrid)
    direct = lagrangian_direct(p, fg.points, xgrid)
    diff = _max_diff(fg.values, direct)
    primal = primal_inf(fbar, xgrid)
    dual = -fg.min()
    gap = primal.value - dual
    i = fg.argmin()
    return {
        "primal_value": primal.value,
        "primal_argmin": None if primal.arg is None else primal.arg.tolist(),
        "dual_value": dual,
        "dual_argmin": fg.points[i].tolist(),
        "gap": gap,
        "no_gap": bool(abs(gap) <= tol),
        "engine_vs_direct_max_diff": diff,
        "engine_matches_direct": bool(diff <= tol),
        "multipliers": fg.points[:, 0].tolist() if p.m == 1 else fg.points.tolist(),
        "conjugate": fg.values.tolist(),
        "verdict": "holds" if (abs(gap) <= tol and diff <= tol) else "fails",
    }


# ---------------------------------------------------------------------------
# classic duality as a G-conjugate
# ---------------------------------------------------------------------------

def classic_recovery_check(s: PerturbationScheme, xgrid: GridSpec, ugrid: GridSpec,
                           ustar_grid: GridSpec, tol: float = DEFAULT_TOL, *,
                           hstar: Optional[SampledFn] = None) -> dict:
    """Build g(x, x*) = f(x) + h*(x*) and check that f^g = h* on dom h*.

    C is taken as the smallest box holding the finite grid values of h*;
    off the tabulated points h* is computed on demand.
    """
    f = s.primal()
    hs = hstar_table(s, ustar_grid, ugrid, xgrid) if hstar is None else hstar
    fin = hs.finite
    if not np.any(fin):
        raise ValueError("h* is nowhere finite on the grid")
    dom = hs.points[fin]
    C = SetSpec.box(dom.min(axis=0), dom.max(axis=0))
    memo = {tuple(pt.tolist()): float(v) for pt, v in zip(hs.points, hs.values)}

    def hstar(XS):
        flat = XS.reshape(-1, s.p)
        keys = [tuple(r.tolist()) for r in flat]
        missing = [i for i, k in enumerate(keys) if k not in memo]
        if missing:
            res = marginal_conjugate(s, flat[missing], ugrid, xgrid)
            for i, r in zip(missing, res):
                memo[keys[i]] = r.value
        return np.array([memo[k] for k in keys]).reshape(XS.shape[:-1])

    def g(X, XS):
        in_c = C.contains(XS)
        fx = f(X)
        hv = hstar(np.asarray(XS, dtype=float))
        val = np.where(np.isfinite(fx), fx + hv, 0.0)
        return np.where(in_c & (hv < math.inf), val, np.inf)

    coupling = CouplingFn(s.n, s.p, g, C, "classic", {})
    cg = GridSpec(ustar_grid.box, ustar_grid.points_per_dim, 0)
    fg = g_conjugate(f, coupling, cg, xgrid)
    ref = np.array([memo[tuple(pt.tolist())] for pt in fg.points])
    keep = ref < math.inf
    diff = _max_diff(fg.values[keep], ref[keep])
    mem = membership_Ff(f, coupling, xgrid, cg, tol, fg=SampledFn(
        fg.points[keep], fg.values[keep], fg.status[keep], C, cg))
    return {
        "C": C.to_dict(),
        "fg_minus_hstar_max": diff,
        "fg_equals_hstar": bool(diff <= tol),
        "membership": mem.as_dict(),
        "verdict": "holds" if (diff <= tol and mem.member) else "fails",
    }
