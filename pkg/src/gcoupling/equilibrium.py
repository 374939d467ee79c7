"""Equilibrium problems, their gap functions and the ZDGP dual schemes.

An equilibrium problem asks for x in K with f(x, y) >= 0 for all y in K.
For each x the restricted function f-bar(x, .) (+inf off K) is conjugated
with a G-coupling; a coupling has the zero duality gap property (ZDGP) when
inf_y f-bar(x, y) + inf_{x*} f-bar_x^g(x*) = 0 on F, the set where the
primal infimum is finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .conjugate import g_conjugate
from .coupling import CouplingFn, ProperFn, builtin_coupling
from .extreal import (
    DEFAULT_RADIUS,
    DEFAULT_TOL,
    GridSpec,
    ext_sub_lower_array,
    optimize_many,
    optimize_over_grid,
)
from .sets import SetSpec

__all__ = [
    "EPInstance",
    "VIPInstance",
    "EPVIPInstance",
    "ep_residual",
    "ep_gap",
    "ik_and_Kstar",
    "fenchel_conjugate",
    "zdgp_check",
    "jemlws_certificate",
    "vip_gap",
    "epvip_gap",
    "kstar_grid",
]


@dataclass
class EPInstance:
    """Bifunction ``f(X, Y)`` on ``K x R^n``, vectorized over leading axes."""

    K: SetSpec
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "ep"

    @property
    def n(self) -> int:
        return self.K.dim

    def __call__(self, X, Y) -> np.ndarray:
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return np.asarray(self.f(np.asarray(X, float), np.asarray(Y, float)), dtype=float)

    def fbar(self, X, Y) -> np.ndarray:
        """f(x, y) for y in K, +inf otherwise."""
        Y = np.asarray(Y, dtype=float)
        return np.where(self.K.contains(Y), self(X, Y), np.inf)

    def section(self, x) -> ProperFn:
        """y -> f-bar(x, y) as a proper function."""
        x = np.asarray(x, dtype=float).reshape(self.n)
        return ProperFn(self.n, lambda Y: self.fbar(x, Y), name=f"{self.name}(x, .)")

    def ygrid(self, radius: float = DEFAULT_RADIUS, points: int = 201,
              rounds: int = 2) -> GridSpec:
        return GridSpec(self.K.bounding_box(radius), points, rounds)

    def check_diagonal(self, X, tol: float = 1e-10) -> bool:
        """f(x, x) = 0 at the given points of K."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        X = X[self.K.contains(X)]
        return bool(np.all(np.abs(self(X, X)) <= tol))


def _require_in_K(K: SetSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(K.dim)
    if not K.contains(x[None, :])[0]:
        raise ValueError(f"point {x.tolist()} is not in K")
    return x


def ep_residual(inst: EPInstance, x, ygrid: Optional[GridSpec] = None) -> float:
    """inf over y in K of f(x, y); -inf when the infimum diverges (x not in F).

    Examples
    --------
    >>> inst = EPInstance(SetSpec.box([0], [1]),
    ...                   lambda X, Y: (X[..., 0] - 0.5) * (Y[..., 0] - X[..., 0]))
    >>> ep_residual(inst, [0.0])
    -0.5
    """
    x = _require_in_K(inst.K, x)
    ygrid = ygrid or inst.ygrid()
    r = optimize_over_grid(lambda Y: inst.fbar(x, Y), ygrid, "inf")
    return float(r.value)


def ep_gap(inst: EPInstance, y, xgrid: Optional[GridSpec] = None) -> float:
    """sup over x in K of f(x, y) for y in K, +inf for y outside K."""
    y = np.asarray(y, dtype=float).reshape(inst.n)
    if not inst.K.contains(y[None, :])[0]:
        return math.inf
    xgrid = xgrid or inst.ygrid()

    def obj(X):
        return np.where(inst.K.contains(X), inst(X, y), -np.inf)

    return float(optimize_over_grid(obj, xgrid, "sup").value)


def ik_and_Kstar(K: SetSpec, xstar) -> tuple[float, bool]:
    """i_K(x*) = inf_{x in K} <x*, x> and whether x* lies in K* = dom i_K."""
    v = K.support_inf(xstar)
    return v, v > -math.inf


def kstar_grid(K: SetSpec, coupling: str, radius: float, points: int) -> GridSpec:
    """Grid over the set C of a ZDGP coupling: K+ for cone_inner, K* otherwise."""
    C = K.dual_cone() if coupling == "cone_inner" else K.barrier_cone()
    return GridSpec(C.bounding_box(radius), points, 0)


def fenchel_conjugate(fn: ProperFn, xstars, ygrid: GridSpec) -> np.ndarray:
    """Classical conjugate sup_y <x*, y> - fn(y) at each row of ``xstars``."""
    XS = np.atleast_2d(np.asarray(xstars, dtype=float))

    def obj(P, rows):
        return ext_sub_lower_array(np.sum(XS[rows][:, None, :] * P, axis=-1), fn(P))

    lo = np.tile(ygrid.box.lo_array, (len(XS), 1))
    hi = np.tile(ygrid.box.hi_array, (len(XS), 1))
    return np.array([r.value for r in optimize_many(obj, lo, hi, ygrid, "sup")])


def _coupling_for(inst: EPInstance, coupling: Union[str, CouplingFn]) -> CouplingFn:
    if isinstance(coupling, CouplingFn):
        return coupling
    if coupling not in ("cone_inner", "ik_shifted"):
        raise ValueError("ZDGP couplings are 'cone_inner' and 'ik_shifted'")
    return builtin_coupling(coupling, K=inst.K)


def zdgp_check(inst: EPInstance, coupling: Union[str, CouplingFn], F_sample,
               ygrid: Optional[GridSpec] = None, cgrid: Optional[GridSpec] = None,
               tol: float = DEFAULT_TOL, *, radius: float = 4.0, c_points: int = 41) -> dict:
    """Primal infimum plus dual infimum at each point of ``F_sample``.

    For ``ik_shifted`` the identity f-bar_x^g = f-bar_x^* - i_K and the
    Fenchel lower bound f-bar_x^* - i_K >= 0 are also checked on the C-grid.
    """
    g = _coupling_for(inst, coupling)
    name = g.name
    ygrid = ygrid or inst.ygrid()
    cgrid = cgrid or kstar_grid(inst.K, name, radius, c_points)
    rows, ok = [], True
    for x in np.atleast_2d(np.asarray(F_sample, dtype=float)):
        primal = ep_residual(inst, x, ygrid)
        if primal == -math.inf:
            raise ValueError(f"point {x.tolist()} is not in F")
        fx = inst.section(x)
        fg = g_conjugate(fx, g, cgrid, ygrid)
        dual = fg.min()
        total = primal + dual
        row = {"x": x.tolist(), "primal_inf": primal, "dual_inf": dual, "sum": total,
               "zero_gap": abs(total) <= tol}
        if name == "ik_shifted":
            fstar = fenchel_conjugate(fx, fg.points, ygrid)
            ik = inst.K.support_inf_many(fg.points)
            shifted = fstar - ik
            fin = np.isfinite(fg.values) | np.isfinite(shifted)
            with np.errstate(invalid="ignore"):
                ident = np.where(fin, np.abs(fg.values - shifted) <= tol, fg.values == shifted)
            row["identity_holds"] = bool(np.all(ident))
            row["fenchel_lower_bound"] = bool(np.all(shifted >= -tol))
            ok &= row["identity_holds"] and row["fenchel_lower_bound"]
        ok &= row["zero_gap"]
        rows.append(row)
    return {"coupling": name, "rows": rows, "verdict": "holds" if ok else "fails"}


def jemlws_certificate(inst: EPInstance, xbar, kgrid: Optional[GridSpec] = None,
                       ygrid: Optional[GridSpec] = None, tol: float = DEFAULT_TOL, *,
                       radius: float = 4.0, c_points: int = 41) -> dict:
    """Search K* for x* with f-bar_xbar^*(x*) - i_K(x*) = 0.

    Such an x* exists exactly when xbar solves the equilibrium problem; the
    first grid point (C order) within ``tol`` is returned.
    """
    xbar = _require_in_K(inst.K, xbar)
    ygrid = ygrid or inst.ygrid()
    kgrid = kgrid or kstar_grid(inst.K, "ik_shifted", radius, c_points)
    Kstar = inst.K.barrier_cone()
    XS = Kstar.grid_points(kgrid)
    fstar = fenchel_conjugate(inst.section(xbar), XS, ygrid)
    ik = inst.K.support_inf_many(XS)
    resid = fstar - ik
    with np.errstate(invalid="ignore"):
        hit = np.flatnonzero(np.abs(resid) <= tol)
    fin = resid[np.isfinite(resid)]
    out = {"xbar": xbar.tolist(), "min_residual": float(fin.min()) if fin.size else math.inf}
    if hit.size:
        out.update(status="certified", xstar=XS[hit[0]].tolist())
    else:
        out.update(status="none", xstar=None)
    return out


# ---------------------------------------------------------------------------
# gap functions for variational problems
# ---------------------------------------------------------------------------

@dataclass
class VIPInstance:
    """Affine operator T(y) = M y + q on C with a sampled graph."""

    C: SetSpec
    M: np.ndarray
    q: np.ndarray
    sample: np.ndarray

    @classmethod
    def on_grid(cls, C: SetSpec, M, q, grid: GridSpec) -> "VIPInstance":
        pts = C.grid_points(grid)
        if not len(pts):
            raise ValueError("the graph sample is empty")
        return cls(C, np.atleast_2d(np.asarray(M, float)), np.asarray(q, float).reshape(-1), pts)

    def T(self, Y) -> np.ndarray:
        return np.asarray(Y, float) @ self.M.T + self.q

    def monotone_on_sample(self, tol: float = DEFAULT_TOL, pairs: int = 1000, seed: int = 0) -> bool:
        rng = np.random.default_rng(seed)
        i = rng.integers(len(self.sample), size=pairs)
        j = rng.integers(len(self.sample), size=pairs)
        X, Y = self.sample[i], self.sample[j]
        return bool(np.all(np.sum((self.T(X) - self.T(Y)) * (X - Y), axis=1) >= -tol))


def vip_gap(inst: VIPInstance, x) -> Union[float, np.ndarray]:
    """max over the sampled graph of <v, x - y> with v = T(y).

    >>> C = SetSpec.box([-1], [1])
    >>> vip = VIPInstance.on_grid(C, [[1.0]], [0.0], GridSpec.on([-1], [1], 201))
    >>> vip_gap(vip, [1.0])
    0.25
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1
    X = np.atleast_2d(X.reshape(-1, inst.C.dim) if single else X)
    V = inst.T(inst.sample)
    const = np.sum(V * inst.sample, axis=1)
    vals = np.max(X @ V.T - const[None, :], axis=1)
    return float(vals[0]) if single else vals


@dataclass
class EPVIPInstance:
    """F : R^n -> R^n, eta : R^n x R^n -> R^n and a proper f."""

    F: Callable[[np.ndarray], np.ndarray]
    eta: Callable[[np.ndarray, np.ndarray], np.ndarray]
    f: ProperFn

    @property
    def n(self) -> int:
        return self.f.n


def epvip_gap(inst: EPVIPInstance, x, ygrid: Optional[GridSpec] = None) -> float:
    """min over y of <F(x), eta(y, x)> - f(x) + f(y); -inf when it diverges."""
    x = np.asarray(x, dtype=float).reshape(inst.n)
    ygrid = ygrid or GridSpec.centered(DEFAULT_RADIUS, inst.n, 201)
    Fx = np.asarray(inst.F(x), dtype=float).reshape(inst.n)
    fx = float(inst.f(x[None, :])[0])

    def obj(Y):
        e = np.asarray(inst.eta(Y, np.broadcast_to(x, Y.shape)), dtype=float)
        return np.sum(Fx * e, axis=-1) - fx + inst.f(Y)

    return float(optimize_over_grid(obj, ygrid, "inf").value)
