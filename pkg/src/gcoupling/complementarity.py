"""Complementarity problems as equilibrium problems.

CP(K, T): find x in K with T(x) in K+ and <T(x), x> = 0.  It is the
equilibrium problem for f(x, y) = <T(x), y - x>.  Linear instances
(T(x) = Mx + q on the orthant) have an exact enumeration oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .conjugate import g_conjugate_at
from .coupling import builtin_coupling
from .equilibrium import EPInstance
from .extreal import DEFAULT_TOL, GridSpec, ext_sub_lower_array, optimize_many
from .sets import SetSpec

__all__ = [
    "CPInstance",
    "LCPResult",
    "cp_check",
    "lcp_enumerate",
    "cp_dual_closed_form",
    "cp_dual_engine",
    "cp_zdgp_equivalence",
]


@dataclass
class CPInstance:
    """T(x) = M x + q (or a general vectorized map) over a closed convex cone K."""

    M: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    K: Optional[SetSpec] = None
    T_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "cp"
    _Kplus: Optional[SetSpec] = field(default=None, repr=False)

    def __post_init__(self):
        if self.T_fn is None:
            if self.M is None or self.q is None:
                raise ValueError("a CP instance needs M and q, or a map T")
            self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
            self.q = np.asarray(self.q, dtype=float).reshape(-1)
            if self.M.shape != (len(self.q), len(self.q)):
                raise ValueError("M must be n x n with n = len(q)")
        n = len(self.q) if self.q is not None else None
        if self.K is None:
            if n is None:
                raise ValueError("K is required with a general map T")
            self.K = SetSpec.orthant(n)
        if not self.K.is_cone:
            raise ValueError("K must be a cone")
        self._Kplus = self.K.dual_cone()

    @property
    def n(self) -> int:
        return self.K.dim

    @property
    def Kplus(self) -> SetSpec:
        return self._Kplus

    @property
    def affine(self) -> bool:
        return self.T_fn is None

    def T(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.T_fn is not None:
            return np.asarray(self.T_fn(X), dtype=float)
        return X @ self.M.T + self.q

    def as_ep(self) -> EPInstance:
        return EPInstance(self.K, lambda X, Y: np.sum(self.T(X) * (Y - X), axis=-1),
                          f"{self.name} as EP")


def cp_check(inst: CPInstance, x, tol: float = DEFAULT_TOL) -> bool:
    """x in K, T(x) in K+ and |<T(x), x>| <= tol (memberships up to tol).

    >>> cp_check(CPInstance([[2, 1], [1, 2]], [-1, -1]), [1/3, 1/3])
    True
    """
    x = np.asarray(x, dtype=float).reshape(1, inst.n)
    t = inst.T(x)
    return bool(inst.K.contains(x, tol)[0] and inst.Kplus.contains(t, tol)[0]
                and abs(float(np.sum(t * x))) <= tol)


@dataclass
class LCPResult:
    solution: Optional[tuple]
    active_set: Optional[tuple]

    @property
    def found(self) -> bool:
        return self.solution is not None

    def as_floats(self) -> Optional[list]:
        return None if self.solution is None else [float(v) for v in self.solution]


def _solve_exact(A: list, b: list) -> Optional[list]:
    """Gauss-Jordan elimination over the rationals; None when singular."""
    n = len(b)
    aug = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                m = aug[r][col]
                aug[r] = [a - m * c for a, c in zip(aug[r], aug[col])]
    return [aug[r][n] for r in range(n)]


def lcp_enumerate(M, q, tol: float = 0.0) -> LCPResult:
    """Find x >= 0 with w = Mx + q >= 0 and <w, x> = 0 by active-set enumeration.

    Subsets B (the coordinates allowed to be positive) are tried by size and
    then lexicographically; on B the system (Mx + q)_B = 0 is solved exactly
    over the rationals.  Checks use exact arithmetic, relaxed by ``tol``.

    >>> lcp_enumerate([[2, 1], [1, 2]], [-1, -1]).solution
    (Fraction(1, 3), Fraction(1, 3))
    """
    Mf = [[Fraction(v) for v in row] for row in np.atleast_2d(np.asarray(M, dtype=float)).tolist()]
    qf = [Fraction(v) for v in np.asarray(q, dtype=float).reshape(-1).tolist()]
    n = len(qf)
    if n > 20:
        raise ValueError("enumeration is limited to n <= 20")
    t = Fraction(tol)
    for size in range(n + 1):
        for B in itertools.combinations(range(n), size):
            xB = _solve_exact([[Mf[i][j] for j in B] for i in B], [-qf[i] for i in B]) if B else []
            if xB is None:
                continue
            x = [Fraction(0)] * n
            for i, v in zip(B, xB):
                x[i] = v
            if any(v < -t for v in x):
                continue
            w = [sum(Mf[i][j] * x[j] for j in range(n)) + qf[i] for i in range(n)]
            if any(v < -t for v in w):
                continue
            if abs(sum(a * b for a, b in zip(w, x))) > t:
                continue
            return LCPResult(tuple(x), B)
    return LCPResult(None, None)


def cp_dual_closed_form(inst: CPInstance, x, xstar, tol: float = 0.0) -> float:
    """f-bar_x^g(x*) under cone_inner: <T(x), x> if T(x) - x* in K+, else +inf."""
    x = np.asarray(x, dtype=float).reshape(1, inst.n)
    xs = np.asarray(xstar, dtype=float).reshape(1, inst.n)
    t = inst.T(x)
    if inst.Kplus.contains(t - xs, tol)[0]:
        return float(np.sum(t * x))
    return math.inf


def cp_dual_engine(inst: CPInstance, x, xstars, ygrid: GridSpec) -> np.ndarray:
    """The same conjugate from the generic engine, at each row of ``xstars``.

    Rows outside K+ are +inf by definition of the coupling.
    """
    XS = np.atleast_2d(np.asarray(xstars, dtype=float))
    ep = inst.as_ep()
    g = builtin_coupling("cone_inner", K=inst.K)
    res = g_conjugate_at(ep.section(x), g, XS, ygrid)
    return np.array([r.value for r in res])


def cp_zdgp_equivalence(inst: CPInstance, X, ygrid: Optional[GridSpec] = None,
                        cgrid: Optional[GridSpec] = None, tol: float = DEFAULT_TOL, *,
                        radius: float = 4.0, c_points: int = 5, y_points: int = 11) -> dict:
    """Compare F with T^-1(K+) and the dual infimum with the CP conditions.

    ``X`` is a set of points of K.  For each point in F the dual infimum over
    the K+ grid is computed by the engine; it must be <= tol exactly at the
    solutions of the CP.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X = X[inst.K.contains(X)]
    ep = inst.as_ep()
    ygrid = ygrid or ep.ygrid(radius, y_points)
    cgrid = cgrid or GridSpec(inst.Kplus.bounding_box(radius), c_points, 0)
    g = builtin_coupling("cone_inner", K=inst.K)
    XS = g.C.grid_points(cgrid)

    # primal infima for all points at once; divergence means x is not in F
    lo = np.tile(ygrid.box.lo_array, (len(X), 1))
    hi = np.tile(ygrid.box.hi_array, (len(X), 1))
    prim = optimize_many(lambda P, r: ep.fbar(X[r][:, None, :], P), lo, hi, ygrid, "inf")
    in_F = np.array([r.value > -math.inf for r in prim], dtype=bool)

    # dual infima: one row per (x in F, x* on the K+ grid)
    fx = np.flatnonzero(in_F)
    xi = np.repeat(fx, len(XS))
    si = np.tile(np.arange(len(XS)), len(fx))

    def obj(P, r):
        return ext_sub_lower_array(g(P, XS[si[r]][:, None, :]), ep.fbar(X[xi[r]][:, None, :], P))

    dual_vals = np.full(len(X), math.inf)
    if len(xi):
        res = optimize_many(obj, np.tile(ygrid.box.lo_array, (len(xi), 1)),
                            np.tile(ygrid.box.hi_array, (len(xi), 1)), ygrid, "sup")
        vals = np.array([r.value for r in res]).reshape(len(fx), len(XS))
        dual_vals[fx] = vals.min(axis=1)

    rows, f_ok, dual_ok = [], True, True
    for k, x in enumerate(X):
        analytic = bool(inst.Kplus.contains(inst.T(x[None, :]))[0])
        row = {"x": x.tolist(), "in_F": bool(in_F[k]), "T_in_Kplus": analytic}
        f_ok &= bool(in_F[k]) == analytic
        if in_F[k]:
            dual = float(dual_vals[k])
            sol = cp_check(inst, x, tol)
            row.update(dual_inf=dual, solution=sol,
                       consistent=(dual <= tol) if sol else (dual > tol))
            dual_ok &= row["consistent"]
        rows.append(row)
    return {"rows": rows, "F_matches": bool(f_ok), "dual_matches": bool(dual_ok),
            "verdict": "holds" if (f_ok and dual_ok) else "fails"}
