"""Extended-real arithmetic and the truncated-grid sup/inf engine.

Extended reals are plain floats (or float64 arrays) where ``math.inf`` and
``-math.inf`` stand for the two infinities.  NaN is never a value: any NaN
produced while evaluating a function is reported as an
:class:`EvaluationError`.

Every sup/inf over the whole space that appears elsewhere in the package is
realized by :func:`optimize_over_grid` (or its batched sibling
:func:`optimize_many`): a tensor grid on a box, a few rounds of local
refinement around the incumbent, and a box-doubling probe that classifies a
boundary incumbent as divergent once it has run past the divergence cap.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "EvaluationError",
    "GridCapError",
    "Box",
    "GridSpec",
    "OptResult",
    "ext_add_upper",
    "ext_sub_lower",
    "ext_add_upper_array",
    "ext_sub_lower_array",
    "check_no_nan",
    "point_cap",
    "divergence_cap",
    "grid_axis",
    "optimize_over_grid",
    "optimize_many",
    "DEFAULT_TOL",
    "DEFAULT_RADIUS",
]

DEFAULT_TOL = 1e-6
DEFAULT_RADIUS = 20.0
DEFAULT_POINT_CAP = 10**6
DEFAULT_DIVERGENCE_CAP = 1e12
MAX_DOUBLINGS = 64

# rows * points evaluated in one vectorized call
_BATCH_BUDGET = 2_000_000


class EvaluationError(ArithmeticError):
    """A function evaluation produced NaN (an undefined operation)."""


class GridCapError(ValueError):
    """A grid would exceed the configured point cap."""


def point_cap() -> int:
    return int(os.environ.get("GCOUPLING_POINT_CAP", DEFAULT_POINT_CAP))


def divergence_cap() -> float:
    return float(os.environ.get("GCOUPLING_DIVERGENCE_CAP", DEFAULT_DIVERGENCE_CAP))


# ---------------------------------------------------------------------------
# extended arithmetic
# ---------------------------------------------------------------------------

def ext_add_upper(a: float, b: float) -> float:
    """Sum in which ``+inf`` absorbs everything, including ``-inf``."""
    if a == math.inf or b == math.inf:
        return math.inf
    return float(a) + float(b)


def ext_sub_lower(a: float, b: float) -> float:
    """Difference ``a - b`` in which ambiguous cases resolve to ``-inf``.

    ``b = +inf`` always gives ``-inf`` (a point outside the effective domain
    never contributes to a supremum), and so does ``a = -inf``.
    """
    if b == math.inf or a == -math.inf:
        return -math.inf
    return float(a) - float(b)


def ext_add_upper_array(a, b) -> np.ndarray:
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    with np.errstate(invalid="ignore"):
        out = a + b
    out[(a == np.inf) | (b == np.inf)] = np.inf
    return out


def ext_sub_lower_array(a, b) -> np.ndarray:
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    with np.errstate(invalid="ignore"):
        out = a - b
    out[(b == np.inf) | (a == -np.inf)] = -np.inf
    return out


def check_no_nan(values, what: str = "function") -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if np.isnan(values).any():
        raise EvaluationError(f"{what} produced NaN")
    return values


# ---------------------------------------------------------------------------
# boxes and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Product of closed intervals ``[lo_i, hi_i]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must be non-empty and of equal length")
        if any(not (math.isfinite(a) and math.isfinite(b)) for a, b in zip(lo, hi)):
            raise ValueError("box bounds must be finite")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"box with lo > hi: {lo} {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def centered(cls, radius: float, dim: int = 1, center=None) -> "Box":
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls(tuple(c - radius), tuple(c + radius))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lo_array(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def hi_array(self) -> np.ndarray:
        return np.array(self.hi)

    def scaled(self, factor: float) -> "Box":
        lo, hi = self.lo_array, self.hi_array
        c, half = (lo + hi) / 2, (hi - lo) / 2
        return Box(tuple(c - factor * half), tuple(c + factor * half))

    def doubled(self) -> "Box":
        return self.scaled(2.0)

    def product(self, other: "Box") -> "Box":
        return Box(self.lo + other.lo, self.hi + other.hi)

    def split(self, n: int) -> tuple["Box", "Box"]:
        return Box(self.lo[:n], self.hi[:n]), Box(self.lo[n:], self.hi[n:])

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.all((p >= self.lo_array) & (p <= self.hi_array), axis=-1)

    @property
    def min_half_width(self) -> float:
        return float(np.min((self.hi_array - self.lo_array) / 2))


def grid_axis(lo: float, hi: float, num: int) -> np.ndarray:
    """Equally spaced nodes with exact endpoints and exact symmetric nodes.

    ``(lo*(num-1-k) + hi*k) / (num-1)`` rounds once, so nodes such as ``0``
    and ``±1`` on ``[-2, 2]`` are hit exactly.
    """
    k = np.arange(num, dtype=float)
    if num == 1:
        return np.array([lo])
    return (lo * (num - 1 - k) + hi * k) / (num - 1)


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid over a box plus the number of local refinement rounds."""

    box: Box
    points_per_dim: int = 201
    refinement_rounds: int = 2

    def __post_init__(self):
        if self.points_per_dim < 2:
            raise ValueError("points_per_dim must be >= 2")
        if self.refinement_rounds < 0:
            raise ValueError("refinement_rounds must be >= 0")
        if self.num_points > point_cap():
            raise GridCapError(
                f"grid of {self.num_points} points exceeds cap {point_cap()}")

    @classmethod
    def centered(cls, radius: float = DEFAULT_RADIUS, dim: int = 1,
                 points_per_dim: int = 201, refinement_rounds: int = 2) -> "GridSpec":
        return cls(Box.centered(radius, dim), points_per_dim, refinement_rounds)

    @classmethod
    def on(cls, lo, hi, points_per_dim: int = 201, refinement_rounds: int = 2) -> "GridSpec":
        return cls(Box(lo, hi), points_per_dim, refinement_rounds)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def num_points(self) -> int:
        return self.points_per_dim ** self.box.dim

    def axes(self) -> list[np.ndarray]:
        return [grid_axis(a, b, self.points_per_dim)
                for a, b in zip(self.box.lo, self.box.hi)]

    def points(self) -> np.ndarray:
        """Grid nodes in lexicographic (C) order, shape ``(N, dim)``."""
        axes = self.axes()
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def with_box(self, box: Box) -> "GridSpec":
        return GridSpec(box, self.points_per_dim, self.refinement_rounds)


@dataclass
class OptResult:
    """Outcome of a grid sup/inf.

    ``widened`` is set when doubling the box kept improving the incumbent
    without crossing the divergence cap: the extremum is then an infimum or
    supremum approached at the edge of the box rather than an attained one.
    """

    value: float
    arg: Optional[np.ndarray]
    status: str
    widened: bool = False
    box: Optional[Box] = field(default=None, repr=False)

    def __post_init__(self):
        if self.status not in ("attained", "divergent", "empty-domain"):
            raise ValueError(f"bad status {self.status!r}")
        if (self.status == "attained") != (self.arg is not None):
            raise ValueError("attained results carry an argument, others do not")
        if self.status == "divergent" and math.isfinite(self.value):
            raise ValueError("divergent results are infinite")

    @property
    def attained(self) -> bool:
        return self.status == "attained"

    @property
    def divergent(self) -> bool:
        return self.status == "divergent"


# ---------------------------------------------------------------------------
# grid engine
# ---------------------------------------------------------------------------

def _unit_index(ppd: int, dim: int) -> np.ndarray:
    return np.indices((ppd,) * dim).reshape(dim, -1).T


def _row_points(lo: np.ndarray, hi: np.ndarray, ppd: int, idx: np.ndarray) -> np.ndarray:
    """Grid points for each row box: ``lo, hi`` of shape (K, d) -> (K, M, d)."""
    k = np.arange(ppd, dtype=float)
    coords = (lo[:, :, None] * (ppd - 1 - k) + hi[:, :, None] * k) / (ppd - 1)
    d = lo.shape[1]
    return coords[:, np.arange(d)[None, :], idx]


def _evaluate(phi, points: np.ndarray, rows: np.ndarray, sign: float):
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        raw = phi(points, rows)
    vals = check_no_nan(raw, "objective")
    vals = np.broadcast_to(vals, points.shape[:2])
    score = sign * vals
    best = np.argmax(score, axis=1)
    r = np.arange(points.shape[0])
    return score[r, best], points[r, best], vals[r, best]


def _search(phi, lo, hi, rows, ppd, rounds, idx, sign):
    """Grid search plus refinement on per-row boxes. Returns (score, arg, value)."""
    pts = _row_points(lo, hi, ppd, idx)
    score, arg, val = _evaluate(phi, pts, rows, sign)
    step = (hi - lo) / (ppd - 1)
    for _ in range(rounds):
        rlo = np.maximum(arg - step, lo)
        rhi = np.minimum(arg + step, hi)
        s2, a2, v2 = _evaluate(phi, _row_points(rlo, rhi, ppd, idx), rows, sign)
        better = s2 > score
        score = np.where(better, s2, score)
        arg = np.where(better[:, None], a2, arg)
        val = np.where(better, v2, val)
        step = (rhi - rlo) / (ppd - 1)
    return score, arg, val


def _on_boundary(arg, lo, hi) -> np.ndarray:
    free = hi > lo
    return np.any(free & ((arg == lo) | (arg == hi)), axis=1)


def optimize_many(phi: Callable, lo, hi, grid: GridSpec, mode: str, *,
                  widen: str = "classify", cap: Optional[float] = None,
                  max_doublings: int = MAX_DOUBLINGS) -> list[OptResult]:
    """Optimize a family of functions, one per row, each over its own box.

    Parameters
    ----------
    phi : callable
        ``phi(points, rows)`` with ``points`` of shape ``(K, M, d)`` and
        ``rows`` the integer row ids being evaluated; returns ``(K, M)``.
    lo, hi : array_like, shape (R, d)
        Per-row boxes.
    grid : GridSpec
        Supplies points per dimension and refinement rounds (its box is
        ignored here).
    mode : {"sup", "inf"}
    widen : {"classify", "follow", "none"}
        ``classify`` doubles the box only to decide divergence and otherwise
        reports the original box result; ``follow`` adopts every strict
        improvement found by doubling; ``none`` never widens.
    """
    if mode not in ("sup", "inf"):
        raise ValueError("mode must be 'sup' or 'inf'")
    if widen not in ("classify", "follow", "none"):
        raise ValueError("widen must be 'classify', 'follow' or 'none'")
    sign = 1.0 if mode == "sup" else -1.0
    cap = divergence_cap() if cap is None else cap
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    nrows, d = lo.shape
    ppd, rounds = grid.points_per_dim, grid.refinement_rounds
    idx = _unit_index(ppd, d)
    chunk = max(1, _BATCH_BUDGET // max(1, len(idx)))

    def search(rows, rlo, rhi, nrounds):
        out_s, out_a, out_v = [], [], []
        for start in range(0, len(rows), chunk):
            sl = slice(start, start + chunk)
            s, a, v = _search(phi, rlo[sl], rhi[sl], rows[sl], ppd, nrounds, idx, sign)
            out_s.append(s), out_a.append(a), out_v.append(v)
        return np.concatenate(out_s), np.concatenate(out_a), np.concatenate(out_v)

    rows = np.arange(nrows)
    score, arg, val = search(rows, lo, hi, rounds)

    status = np.where(score == -np.inf, "empty-domain", "attained").astype(object)
    widened = np.zeros(nrows, dtype=bool)
    final_lo, final_hi = lo.copy(), hi.copy()

    if widen != "none":
        active = (status == "attained") & _on_boundary(arg, lo, hi)
        chain_score = score.copy()
        clo, chi = lo.copy(), hi.copy()
        for _ in range(max_doublings):
            act = np.flatnonzero(active)
            if act.size == 0:
                break
            c = (clo[act] + chi[act]) / 2
            half = (chi[act] - clo[act])
            nlo, nhi = c - half, c + half
            nrounds = rounds if widen == "follow" else 0
            s, a, v = search(act, nlo, nhi, nrounds)
            improved = s > chain_score[act]
            inside = ~_on_boundary(a, nlo, nhi)
            for j, r in enumerate(act):
                if not improved[j]:
                    active[r] = False
                    continue
                widened[r] = True
                chain_score[r] = s[j]
                clo[r], chi[r] = nlo[j], nhi[j]
                if abs(v[j]) > cap:
                    status[r] = "divergent"
                    val[r] = sign * math.inf
                    active[r] = False
                    continue
                if widen == "follow":
                    score[r], arg[r], val[r] = s[j], a[j], v[j]
                    final_lo[r], final_hi[r] = nlo[j], nhi[j]
                if inside[j]:
                    active[r] = False
        if widen == "follow":
            widened &= status != "divergent"

    results = []
    for r in range(nrows):
        st = status[r]
        if st == "attained":
            results.append(OptResult(float(val[r]), arg[r].copy(), st, bool(widened[r]),
                                     Box(tuple(final_lo[r]), tuple(final_hi[r]))))
        elif st == "divergent":
            results.append(OptResult(sign * math.inf, None, st, True))
        else:
            results.append(OptResult(-sign * math.inf, None, st, False))
    return results


def optimize_over_grid(phi: Callable[[np.ndarray], np.ndarray], grid: GridSpec,
                       mode: str, *, widen: str = "classify", cap: Optional[float] = None,
                       max_doublings: int = MAX_DOUBLINGS) -> OptResult:
    """Sup or inf of ``phi`` over a grid.

    ``phi`` maps an array of points of shape ``(..., d)`` to values of shape
    ``(...)``.  Ties go to the lexicographically smallest grid index; the
    result is deterministic.

    Examples
    --------
    >>> r = optimize_over_grid(lambda p: -p[..., 0]**2, GridSpec.on([-1], [1], 21), "sup")
    >>> r.value, r.status
    (-0.0, 'attained')
    """
    lo = np.array([grid.box.lo])
    hi = np.array([grid.box.hi])
    return optimize_many(lambda pts, rows: phi(pts), lo, hi, grid, mode,
                         widen=widen, cap=cap, max_doublings=max_doublings)[0]


def as_points(x: Sequence[float] | np.ndarray | float, dim: Optional[int] = None) -> np.ndarray:
    """Coerce a point or list of points to a float array of shape (N, dim)."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim == 1:
        arr = arr[None, :] if dim is None or arr.size == dim else arr[:, None]
    return arr
