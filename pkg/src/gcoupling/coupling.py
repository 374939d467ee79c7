"""G-coupling functions: representation, validation and the builtin catalog.

A coupling ``g`` on R^n x R^m is stored together with the closed set ``C``
on which it is finite.  Evaluators are vectorized: ``g(X, XS)`` takes arrays
of shapes ``(..., n)`` and ``(..., m)`` that broadcast against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .extreal import Box, GridSpec, check_no_nan, optimize_over_grid, DEFAULT_TOL
from .sets import SetSpec

__all__ = [
    "ProperFn",
    "CouplingFn",
    "ValidationReport",
    "StarReport",
    "PseudoMonotoneVerdict",
    "BUILTINS",
    "builtin_coupling",
    "validate_coupling",
    "check_star_properties",
    "pseudo_monotone_scan",
    "sample_in_set",
]


@dataclass
class ProperFn:
    """A proper function R^n -> R U {+inf}.

    ``f`` maps ``(..., n)`` arrays to ``(...)`` values.  ``dom_hint`` is an
    optional set known to contain the effective domain; when it is given,
    points outside it are treated as ``+inf`` without calling ``f``.
    """

    n: int
    f: Callable[[np.ndarray], np.ndarray]
    dom_hint: Optional[SetSpec] = None
    name: str = ""

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            vals = np.broadcast_to(np.asarray(self.f(X), dtype=float), X.shape[:-1])
        if self.dom_hint is not None:
            vals = np.where(self.dom_hint.contains(X), vals, np.inf)
        return np.array(check_no_nan(vals, self.name or "f"))

    def in_domain(self, X) -> np.ndarray:
        return np.isfinite(self(X))

    def check_proper(self, points) -> None:
        """Raise if ``f`` takes ``-inf`` or is nowhere finite on ``points``."""
        vals = self(points)
        if np.any(vals == -np.inf):
            raise ValueError(f"{self.name or 'f'} takes the value -inf")
        if not np.any(np.isfinite(vals)):
            raise ValueError(f"{self.name or 'f'} is not finite at any sampled point")


@dataclass
class CouplingFn:
    """Candidate G-coupling ``g(x, x*)``; finite exactly on ``R^n x C``."""

    n: int
    m: int
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    C: SetSpec
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, X, XS) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        XS = np.asarray(XS, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            vals = np.asarray(self.g(X, XS), dtype=float)
        shape = np.broadcast_shapes(X.shape[:-1], XS.shape[:-1])
        return np.array(np.broadcast_to(check_no_nan(vals, self.name), shape))

    @classmethod
    def extended(cls, n: int, m: int, g, C: SetSpec, name: str = "custom",
                 params: Optional[dict] = None) -> "CouplingFn":
        """Wrap a formula valid on ``R^n x C`` so that it is ``+inf`` off C."""

        def ext(X, XS):
            vals = g(X, XS)
            return np.where(C.contains(XS), vals, np.inf)

        return cls(n, m, ext, C, name, params or {})


# ---------------------------------------------------------------------------
# builtin catalog
# ---------------------------------------------------------------------------

def _dot(X, XS):
    return np.sum(X * XS, axis=-1)


def _exp(dim: int = 1):
    return CouplingFn(dim, dim, lambda X, XS: np.exp(np.sum(X, -1) + np.sum(XS, -1)),
                      SetSpec.full(dim), "exp", {"dim": dim})


def _square_product(dim: int = 1):
    return CouplingFn(dim, dim, lambda X, XS: _dot(X, XS) ** 2,
                      SetSpec.full(dim), "square_product", {"dim": dim})


def _reciprocal():
    C = SetSpec.orthant(1)

    def g(X, XS):
        x, s = X[..., 0], XS[..., 0]
        both = (x >= 0) & (s >= 0)
        safe = np.where(both, x * s + 1.0, 1.0)
        return np.where(s < 0, np.inf, np.where(both, 1.0 / safe, 0.0))

    return CouplingFn(1, 1, g, C, "reciprocal", {})


def _domain_predicate(dom):
    if dom is None:
        raise ValueError("norm_on_dom needs the domain of f ('dom')")
    if isinstance(dom, SetSpec):
        return dom.contains, dom.dim
    if isinstance(dom, ProperFn):
        if dom.dom_hint is not None:
            hint = dom.dom_hint
            return (lambda X: hint.contains(X) & dom.in_domain(X)), dom.n
        return dom.in_domain, dom.n
    if callable(dom):
        return dom, None
    raise TypeError(f"cannot use {dom!r} as a domain")


def _norm_on_dom(dom=None, m: int = 1, n: Optional[int] = None):
    pred, dn = _domain_predicate(dom)
    n = n or dn
    if n is None:
        raise ValueError("norm_on_dom needs the primal dimension 'n'")

    def g(X, XS):
        return np.where(pred(X), np.linalg.norm(XS, axis=-1), 0.0)

    return CouplingFn(n, m, g, SetSpec.full(m), "norm_on_dom", {"m": m})


def _orthant_coupling(name, inner, n):
    C = SetSpec.orthant(n)

    def g(X, XS):
        in_c = np.all(XS >= 0, axis=-1)
        in_x = np.all(X >= 0, axis=-1)
        return np.where(~in_c, np.inf, np.where(in_x, inner(X, XS), 0.0))

    return CouplingFn(n, n, g, C, name, {"n": n})


def _max_dot(n: int = 1):
    return _orthant_coupling("max_dot", lambda X, XS: np.max(X * XS, axis=-1), n)


def _min_over_support(X, XS):
    # min over I+(x*) = {i : x*_i > 0}; the empty index set gives 0
    pos = XS > 0
    prod = np.where(pos, X * XS, np.inf)
    return np.where(np.any(pos, axis=-1), np.min(prod, axis=-1), 0.0)


def _min_dot(n: int = 1):
    return _orthant_coupling("min_dot", _min_over_support, n)


def _lagrangian_g1(m: int = 1):
    return _orthant_coupling("lagrangian_g1", _dot, m)


def _require_K(K):
    if K is None:
        raise ValueError("this coupling needs the set K ('K')")
    return K


def _cone_inner(K: Optional[SetSpec] = None):
    K = _require_K(K)
    C = K.dual_cone()

    def g(X, XS):
        return np.where(~C.contains(XS), np.inf,
                        np.where(K.contains(X), _dot(X, XS), 0.0))

    return CouplingFn(K.dim, K.dim, g, C, "cone_inner", {"K": K.to_dict()})


def _ik_shifted(K: Optional[SetSpec] = None):
    K = _require_K(K)
    C = K.barrier_cone()

    def g(X, XS):
        in_c = C.contains(XS)
        ik = np.where(in_c, K.support_inf_many(np.where(in_c[..., None], XS, 0.0)), 0.0)
        return np.where(~in_c, np.inf, np.where(K.contains(X), _dot(X, XS) - ik, 0.0))

    return CouplingFn(K.dim, K.dim, g, C, "ik_shifted", {"K": K.to_dict()})


# name -> (factory, description)
BUILTINS: dict[str, tuple[Callable[..., CouplingFn], str]] = {
    "exp": (_exp, "exp(x + x*) on R x R; a coupling without zeros"),
    "square_product": (_square_product, "(x x*)^2 on R x R; worked example with f = x^2"),
    "reciprocal": (_reciprocal, "1/(x x* + 1) on x, x* >= 0; example outside F_f"),
    "norm_on_dom": (_norm_on_dom, "||x*|| on dom f, 0 elsewhere; makes f^g proper iff inf f > -inf"),
    "max_dot": (_max_dot, "max_i x*_i x_i on the orthant; increasing positively homogeneous"),
    "min_dot": (_min_dot, "min over {i: x*_i > 0} of x*_i x_i on the orthant"),
    "lagrangian_g1": (_lagrangian_g1, "<lambda*, y> for y >= 0; recovers Lagrangian duality"),
    "cone_inner": (_cone_inner, "<x*, y> on K x K+; ZDGP lemma coupling"),
    "ik_shifted": (_ik_shifted, "<x*, y> - i_K(x*) on K x K*; ZDGP proposition coupling"),
}


def builtin_coupling(name: str, **params) -> CouplingFn:
    """Instantiate a coupling from the catalog.

    >>> g = builtin_coupling("max_dot", n=2)
    >>> float(g([1.0, 2.0], [3.0, 1.0]))
    3.0
    """
    try:
        factory = BUILTINS[name][0]
    except KeyError:
        raise KeyError(f"unknown coupling {name!r}; known: {', '.join(BUILTINS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name}: {exc}") from None


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def sample_in_set(S: SetSpec, box: Box, count: int, rng) -> np.ndarray:
    """Uniform samples from ``S`` intersected with ``box`` by rejection."""
    lo, hi = box.lo_array, box.hi_array
    out, tries = [], 0
    while sum(len(o) for o in out) < count:
        cand = rng.uniform(lo, hi, size=(max(count, 64), box.dim))
        out.append(cand[S.contains(cand)])
        tries += 1
        if tries > 200:
            raise ValueError("set has (numerically) empty intersection with the box")
    return np.concatenate(out)[:count]


@dataclass
class ValidationReport:
    d1: bool
    d2: bool
    d3_convex: bool
    inf_value: float
    nonnegative: bool
    d3_lsc: str = "untested"
    d1_violation: Optional[tuple] = None
    d3_violation: Optional[tuple] = None
    c_convex: bool = True

    @property
    def ok(self) -> bool:
        return self.d1 and self.d2 and self.nonnegative

    def as_dict(self) -> dict:
        return {
            "D1": self.d1, "D2": self.d2, "D3_convexity": self.d3_convex,
            "D3_lsc": self.d3_lsc, "C_convex": self.c_convex,
            "inf_g": self.inf_value, "nonnegative": self.nonnegative,
            "D1_violation": _listify(self.d1_violation),
            "D3_violation": _listify(self.d3_violation),
        }


def _listify(obj):
    if obj is None:
        return None
    return [np.asarray(o).tolist() for o in obj]


def validate_coupling(g: CouplingFn, grid: GridSpec, tol: float = DEFAULT_TOL, *,
                      segments: int = 200, seed: int = 0) -> ValidationReport:
    """Check D1, D2 and the convexity half of D3 on a grid over R^n x R^m.

    ``grid`` spans ``n + m`` dimensions: the first ``n`` coordinates are x,
    the rest x*.  The x* part should reach outside C so that D1 is tested
    on both branches.  Lower semicontinuity cannot be certified from samples and
    is reported as ``"untested"``.
    """
    n, m = g.n, g.m
    if grid.dim != n + m:
        raise ValueError(f"grid must have dimension n + m = {n + m}")
    pts = grid.points()
    X, XS = pts[:, :n], pts[:, n:]
    vals = g(X, XS)
    in_c = g.C.contains(XS)

    mismatch = np.flatnonzero((vals == np.inf) != ~in_c)
    d1_violation = (X[mismatch[0]], XS[mismatch[0]]) if mismatch.size else None
    nonneg = bool(np.all(vals[in_c] >= -tol))

    def on_c(P):
        return np.where(g.C.contains(P[..., n:]), g(P[..., :n], P[..., n:]), np.inf)

    res = optimize_over_grid(on_c, grid, "inf", widen="follow")
    inf_value = res.value
    d2 = res.status != "empty-domain" and abs(inf_value) <= tol

    rng = np.random.default_rng(seed)
    xbox, cbox = grid.box.split(n)
    xs = rng.uniform(xbox.lo_array, xbox.hi_array, size=(segments, n))
    a = sample_in_set(g.C, cbox, segments, rng)
    b = sample_in_set(g.C, cbox, segments, rng)
    ga, gb, gm = g(xs, a), g(xs, b), g(xs, (a + b) / 2)
    avg = (ga + gb) / 2
    with np.errstate(invalid="ignore"):
        ok = gm <= avg + tol * (1 + np.abs(avg))
    bad = np.flatnonzero(~ok)
    d3_violation = (xs[bad[0]], a[bad[0]], b[bad[0]]) if bad.size else None

    return ValidationReport(
        d1=mismatch.size == 0, d2=bool(d2), d3_convex=bad.size == 0,
        inf_value=float(inf_value), nonnegative=nonneg,
        d1_violation=d1_violation, d3_violation=d3_violation,
    )


@dataclass
class StarReport:
    homogeneous_x: bool
    increasing_x: bool
    homogeneous_xstar: bool
    increasing_xstar: bool
    counterexamples: dict

    @property
    def holds(self) -> bool:
        return (self.homogeneous_x and self.increasing_x
                and self.homogeneous_xstar and self.increasing_xstar)


def _close(a, b, tol):
    with np.errstate(invalid="ignore"):
        return np.abs(a - b) <= tol * (1 + np.maximum(np.abs(a), np.abs(b)))


def check_star_properties(g: CouplingFn, samples: Optional[dict] = None, *,
                          count: int = 1000, seed: int = 0,
                          tol: float = 1e-9) -> StarReport:
    """Increasing and positively homogeneous in each slot, on the orthant.

    ``samples`` may supply arrays ``x``, ``xstar`` (points of the orthant),
    ``t`` (positive scalars) and ``dx``, ``dxstar`` (nonnegative increments);
    missing entries are drawn from a seeded generator.
    """
    if g.n != g.m:
        raise ValueError("property (*) is stated for n = m")
    rng = np.random.default_rng(seed)
    n = g.n
    s = dict(samples or {})
    X = np.atleast_2d(np.asarray(s.get("x", rng.uniform(0, 2, (count, n))), dtype=float))
    k = len(X)
    XS = np.atleast_2d(np.asarray(s.get("xstar", rng.uniform(0, 2, (k, n))), dtype=float))
    T = np.asarray(s.get("t", rng.uniform(0.1, 3.0, k)), dtype=float).reshape(k)
    DX = np.atleast_2d(np.asarray(s.get("dx", rng.uniform(0, 1, (k, n))), dtype=float))
    DXS = np.atleast_2d(np.asarray(s.get("dxstar", rng.uniform(0, 1, (k, n))), dtype=float))

    base = g(X, XS)
    checks = {
        "homogeneous_x": _close(g(T[:, None] * X, XS), T * base, tol),
        "homogeneous_xstar": _close(g(X, T[:, None] * XS), T * base, tol),
        "increasing_x": g(X, XS) <= g(X + DX, XS) + tol * (1 + np.abs(base)),
        "increasing_xstar": g(X, XS) <= g(X, XS + DXS) + tol * (1 + np.abs(base)),
    }
    counter = {}
    for key, ok in checks.items():
        bad = np.flatnonzero(~ok)
        if bad.size:
            i = bad[0]
            counter[key] = {"x": X[i].tolist(), "xstar": XS[i].tolist(), "t": float(T[i]),
                            "dx": DX[i].tolist(), "dxstar": DXS[i].tolist()}
    return StarReport(**{key: bool(np.all(ok)) for key, ok in checks.items()},
                      counterexamples=counter)


@dataclass
class PseudoMonotoneVerdict:
    pseudo_monotone: bool
    violating_pair: Optional[tuple]
    max_g: float
    null_on_samples: bool


def pseudo_monotone_scan(g: CouplingFn, X=None, Y=None, *, tol: float = DEFAULT_TOL,
                         count: int = 1000, radius: float = 5.0,
                         seed: int = 0) -> PseudoMonotoneVerdict:
    """Scan sampled pairs of ``C x C`` for ``g(x,y) >= 0 and g(y,x) > 0``.

    Since couplings are nonnegative, a clean scan forces ``g = 0`` on the
    samples; ``null_on_samples`` records that consequence.
    """
    if g.n != g.m:
        raise ValueError("pseudo-monotonicity needs n = m")
    if X is None or Y is None:
        rng = np.random.default_rng(seed)
        box = g.C.bounding_box(radius)
        X = sample_in_set(g.C, box, count, rng)
        Y = sample_in_set(g.C, box, count, rng)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    gxy, gyx = g(X, Y), g(Y, X)
    bad = np.flatnonzero((gxy >= 0) & (gyx > tol))
    both = np.concatenate([gxy, gyx])
    max_g = float(np.max(both)) if both.size else 0.0
    pair = (X[bad[0]].tolist(), Y[bad[0]].tolist()) if bad.size else None
    return PseudoMonotoneVerdict(bad.size == 0, pair, max_g, bool(max_g <= tol))
