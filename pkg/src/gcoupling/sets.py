"""Closed convex sets with exact membership: boxes, orthants, the whole
space, halfspace intersections and dual cones.

The same objects serve as the set ``C`` of a coupling, the constraint set
``K`` of an equilibrium problem, and the analytic inputs of the recession
cone routines.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .extreal import Box, GridSpec

__all__ = ["SetSpec", "SetSpecError", "set_from_dict"]

KINDS = ("box", "orthant", "full", "halfspaces", "dual_cone_of")


class SetSpecError(ValueError):
    """The description does not denote a non-empty closed set."""


def _lp_min(c, A, b):
    """min <c, x> s.t. A x >= b; returns -inf when unbounded."""
    c = np.asarray(c, dtype=float)
    res = linprog(c, A_ub=-A, b_ub=-b, bounds=[(None, None)] * len(c), method="highs")
    if res.status == 3:
        return -math.inf
    if res.status == 2:
        raise SetSpecError("halfspace system is infeasible")
    if res.status != 0:
        raise RuntimeError(f"linprog failed: {res.message}")
    return float(res.fun)


@dataclass(frozen=True, eq=False)
class SetSpec:
    """A structured closed convex set in R^dim.

    kind
        ``box`` (``lo``, ``hi``), ``orthant`` (R^dim_+), ``full`` (R^dim),
        ``halfspaces`` (rows ``<a_j, x> >= b_j``) or ``dual_cone_of`` (the
        dual cone ``{x*: <x*, x> >= 0 for x in base}`` of ``base``).
    """

    kind: str
    dim: int
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    base: Optional["SetSpec"] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SetSpecError(f"unknown set kind {self.kind!r}")
        if self.dim < 1:
            raise SetSpecError("dimension must be >= 1")
        if self.kind == "box":
            lo = np.asarray(self.lo, dtype=float).reshape(self.dim)
            hi = np.asarray(self.hi, dtype=float).reshape(self.dim)
            if np.any(lo > hi) or np.isnan(lo).any() or np.isnan(hi).any():
                raise SetSpecError("empty box (lo > hi)")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        elif self.kind == "halfspaces":
            A = np.asarray(self.A, dtype=float).reshape(-1, self.dim)
            b = np.asarray(self.b, dtype=float).reshape(-1)
            if len(A) != len(b):
                raise SetSpecError("halfspaces need one offset per row")
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "b", b)
            if len(A):
                # feasibility doubles as the non-emptiness check
                _lp_min(np.zeros(self.dim), A, b)
        elif self.kind == "dual_cone_of":
            if self.base is None or self.base.dim != self.dim:
                raise SetSpecError("dual_cone_of needs a base set of the same dimension")

    # constructors --------------------------------------------------------

    @classmethod
    def box(cls, lo, hi) -> "SetSpec":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        return cls("box", len(lo), lo=lo, hi=hi)

    @classmethod
    def orthant(cls, dim: int) -> "SetSpec":
        return cls("orthant", dim)

    @classmethod
    def full(cls, dim: int) -> "SetSpec":
        return cls("full", dim)

    @classmethod
    def halfspaces(cls, A, b) -> "SetSpec":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls("halfspaces", A.shape[1], A=A, b=b)

    @classmethod
    def dual_cone_of(cls, base: "SetSpec") -> "SetSpec":
        return cls("dual_cone_of", base.dim, base=base)

    def __eq__(self, other):
        return isinstance(other, SetSpec) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    # membership ----------------------------------------------------------

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        """Vectorized membership for points of shape ``(..., dim)``.

        ``tol`` relaxes every defining inequality by that amount.
        """
        p = np.asarray(points, dtype=float)
        if p.shape[-1] != self.dim:
            raise ValueError(f"points of dimension {p.shape[-1]} for a set in R^{self.dim}")
        if self.kind == "full":
            return np.ones(p.shape[:-1], dtype=bool)
        if self.kind == "orthant":
            return np.all(p >= -tol, axis=-1)
        if self.kind == "box":
            return np.all((p >= self.lo - tol) & (p <= self.hi + tol), axis=-1)
        if self.kind == "halfspaces":
            if len(self.A) == 0:
                return np.ones(p.shape[:-1], dtype=bool)
            return np.all(p @ self.A.T >= self.b - tol, axis=-1)
        return self._dual_contains(p, tol)

    def _dual_contains(self, p, tol):
        base = self.base
        if base.kind in ("orthant", "full", "box", "dual_cone_of") or base.is_cone:
            closed = self.closed_form()
            if closed is not None:
                return closed.contains(p, tol)
        flat = p.reshape(-1, self.dim)
        out = np.array([base.support_inf(q) >= -tol for q in flat], dtype=bool)
        return out.reshape(p.shape[:-1])

    # structure -----------------------------------------------------------

    @property
    def is_cone(self) -> bool:
        if self.kind in ("orthant", "full", "dual_cone_of"):
            return True
        if self.kind == "box":
            return bool(np.all(self.lo == 0) and np.all(self.hi == 0))
        return bool(np.all(self.b == 0)) if len(self.b) else True

    @property
    def is_bounded(self) -> bool:
        if self.kind == "box":
            return True
        if self.kind in ("orthant", "full"):
            return False
        rc = self.recession_cone()
        if rc.kind == "box":
            return True
        if rc.kind == "halfspaces":
            # {d : A d >= 0} = {0} iff no unit direction satisfies it
            return not _has_nonzero_direction(rc.A)
        return False

    def closed_form(self) -> Optional["SetSpec"]:
        """A non-dual description of a ``dual_cone_of`` set, when one is known."""
        if self.kind != "dual_cone_of":
            return self
        if "closed" in self._cache:
            return self._cache["closed"]
        base, out = self.base, None
        if base.kind == "orthant":
            out = SetSpec.orthant(self.dim)
        elif base.kind == "full":
            out = SetSpec.box(np.zeros(self.dim), np.zeros(self.dim))
        elif base.kind == "box":
            # K+ = {x*: <x*, v> >= 0 for every vertex v}
            verts = np.array(list(itertools.product(*zip(base.lo, base.hi))))
            out = SetSpec.halfspaces(verts, np.zeros(len(verts)))
        elif base.kind == "dual_cone_of":
            inner = base.base
            if inner.is_cone:
                out = inner.closed_form()
        self._cache["closed"] = out
        return out

    def dual_cone(self) -> "SetSpec":
        """``K+ = {x*: <x*, x> >= 0 for all x in K}``."""
        d = SetSpec.dual_cone_of(self)
        closed = d.closed_form()
        if closed is None:
            return d
        if closed.kind == "halfspaces":
            return _simplify_sign_rows(closed)
        return closed

    def recession_cone(self) -> "SetSpec":
        if self.kind == "box":
            return SetSpec.box(np.zeros(self.dim), np.zeros(self.dim))
        if self.kind == "halfspaces":
            return SetSpec.halfspaces(self.A, np.zeros(len(self.b))) if len(self.A) \
                else SetSpec.full(self.dim)
        return self

    def barrier_cone(self) -> "SetSpec":
        """Effective domain of ``i_K``: the dual of the recession cone."""
        rc = self.recession_cone()
        if rc.kind == "box":
            return SetSpec.full(self.dim)
        return rc.dual_cone()

    # support infimum -----------------------------------------------------

    def support_inf(self, xstar) -> float:
        """``i_K(x*) = inf_{x in K} <x*, x>`` in closed form or by LP."""
        xs = np.asarray(xstar, dtype=float).reshape(self.dim)
        if self.kind == "full":
            return 0.0 if np.all(xs == 0) else -math.inf
        if self.kind == "orthant":
            return 0.0 if np.all(xs >= 0) else -math.inf
        if self.kind == "box":
            return float(np.sum(np.minimum(xs * self.lo, xs * self.hi)))
        if self.kind == "halfspaces":
            if len(self.A) == 0:
                return 0.0 if np.all(xs == 0) else -math.inf
            return _lp_min(xs, self.A, self.b)
        # dual cones are cones: the infimum is 0 or -inf
        closed = self.closed_form()
        if closed is not None:
            return closed.support_inf(xs)
        return 0.0 if _in_double_dual(self, xs) else -math.inf

    def support_inf_many(self, xstars) -> np.ndarray:
        xs = np.asarray(xstars, dtype=float)
        flat = xs.reshape(-1, self.dim)
        if self.kind == "box":
            out = np.sum(np.minimum(flat * self.lo, flat * self.hi), axis=-1)
        elif self.kind == "orthant":
            out = np.where(np.all(flat >= 0, axis=-1), 0.0, -np.inf)
        elif self.kind == "full":
            out = np.where(np.all(flat == 0, axis=-1), 0.0, -np.inf)
        else:
            out = np.array([self.support_inf(q) for q in flat])
        return out.reshape(xs.shape[:-1])

    # grids ---------------------------------------------------------------

    def bounding_box(self, radius: float) -> Box:
        """A box that covers the set's part of ``[-radius, radius]^dim``,
        tightened to the set's own bounds where they are known."""
        lo = np.full(self.dim, -float(radius))
        hi = np.full(self.dim, float(radius))
        if self.kind == "box":
            lo, hi = self.lo.copy(), self.hi.copy()
        elif self.kind == "orthant":
            lo = np.zeros(self.dim)
        return Box(tuple(lo), tuple(hi))

    def grid_points(self, grid: GridSpec, tol: float = 0.0) -> np.ndarray:
        pts = grid.points()
        return pts[self.contains(pts, tol)]

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "dim": self.dim}
        if self.kind == "box":
            d.update(lo=self.lo.tolist(), hi=self.hi.tolist())
        elif self.kind == "halfspaces":
            d.update(A=self.A.tolist(), b=self.b.tolist())
        elif self.kind == "dual_cone_of":
            d["of"] = self.base.to_dict()
        return d


def set_from_dict(spec, dim: Optional[int] = None) -> SetSpec:
    """Build a :class:`SetSpec` from its problem-file form.

    Accepts a bare kind string (``"orthant"``, ``"full"``) when ``dim`` is
    known from context.
    """
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SetSpecError(f"set spec must be a mapping with a 'kind': {spec!r}")
    kind = spec["kind"]
    d = spec.get("dim", dim)
    if kind == "box":
        return SetSpec.box(spec["lo"], spec["hi"])
    if kind == "halfspaces":
        return SetSpec.halfspaces(spec["A"], spec["b"])
    if kind == "dual_cone_of":
        return SetSpec.dual_cone_of(set_from_dict(spec["of"], d))
    if d is None:
        raise SetSpecError(f"set of kind {kind!r} needs a dimension")
    return SetSpec(kind, int(d))


def _simplify_sign_rows(h: SetSpec) -> SetSpec:
    """Recognize ``{x : V x >= 0}`` as R^n_+ when V >= 0 and every axis has a
    row supported on it alone."""
    V = h.A[np.any(h.A != 0, axis=1)]
    if not np.all(h.b == 0) or not len(V) or np.any(V < 0):
        return h
    for i in range(h.dim):
        alone = (V[:, i] > 0) & (np.count_nonzero(V, axis=1) == 1)
        if not alone.any():
            return h
    return SetSpec.orthant(h.dim)


def _has_nonzero_direction(A: np.ndarray) -> bool:
    n = A.shape[1]
    for i in range(n):
        for s in (1.0, -1.0):
            c = np.zeros(n)
            c[i] = -s
            res = linprog(c, A_ub=-A, b_ub=np.zeros(len(A)),
                          bounds=[(-1, 1)] * n, method="highs")
            if res.status == 0 and -res.fun > 1e-12:
                return True
    return False


def _in_double_dual(cone: SetSpec, xs: np.ndarray) -> bool:
    # (K+)+ = K for a closed convex cone K
    base = cone.base
    if not base.is_cone:
        raise NotImplementedError("support function of the dual of a non-conic set")
    return bool(base.contains(xs[None, :])[0])
