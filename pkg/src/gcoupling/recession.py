"""Level sets and zero set of gamma, recession cones and the compactness test.

Recession cones of sampled sets are approximated on a grid of unit
directions: a direction is kept when, at every rung of a radius ladder, some
sample point of at least that norm lies within ``angular_tol`` of it.
Analytic sets (:class:`SetSpec`) get their exact cones instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from .conjugate import GammaFn
from .extreal import DEFAULT_TOL, Box, GridSpec
from .sets import SetSpec

__all__ = [
    "PointCloud",
    "DirectionSet",
    "sphere_directions",
    "level_set_sample",
    "zero_set",
    "recession_directions",
    "R_gamma",
    "RecessionSetup",
    "compactness_verdict",
]

DEFAULT_ANGULAR_TOL = 1.5  # degrees


# ---------------------------------------------------------------------------
# direction grids
# ---------------------------------------------------------------------------

def _icosphere(subdivisions: int) -> np.ndarray:
    p = (1 + math.sqrt(5)) / 2
    verts = [(-1, p, 0), (1, p, 0), (-1, -p, 0), (1, -p, 0), (0, -1, p), (0, 1, p),
             (0, -1, -p), (0, 1, -p), (p, 0, -1), (p, 0, 1), (-p, 0, -1), (-p, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9),
             (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2),
             (3, 2, 6), (3, 6, 8), (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10),
             (8, 6, 7), (9, 8, 1)]
    pts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache, new_faces = {}, []

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = pts[i] + pts[j]
                pts.append(m / np.linalg.norm(m))
                cache[key] = len(pts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.array(pts)


@lru_cache(maxsize=16)
def sphere_directions(dim: int, resolution: float = 1.0) -> np.ndarray:
    """Unit directions covering the sphere in R^dim.

    2D uses an angular step of ``resolution`` degrees; 3D an icosphere
    refined until its edge angle is at most ``4 * resolution`` degrees;
    higher dimensions use normalized nonzero integer vectors.
    """
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    if dim == 2:
        k = int(round(360 / resolution))
        t = np.radians(np.arange(k) * 360.0 / k)
        out = np.stack([np.cos(t), np.sin(t)], axis=1)
    elif dim == 3:
        sub, edge = 0, 63.4
        while edge > 4 * resolution and sub < 5:
            sub, edge = sub + 1, edge / 2
        out = _icosphere(sub)
    else:
        r = 2
        pts = np.array([p for p in itertools.product(range(-r, r + 1), repeat=dim) if any(p)],
                       dtype=float)
        out = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        out = np.unique(np.round(out, 12), axis=0)
    out = out / np.linalg.norm(out, axis=1, keepdims=True)
    out.setflags(write=False)
    return out


@dataclass
class PointCloud:
    """Grid points of a set inside a sampling box."""

    points: np.ndarray
    box: Box
    description: str = ""

    @property
    def dim(self) -> int:
        return self.box.dim

    def __len__(self):
        return len(self.points)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0

    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.points, axis=1))) if len(self.points) else 0.0


@dataclass
class DirectionSet:
    """A closed cone represented by the unit directions it contains.

    An empty ``mask`` stands for the cone {0}.  ``exact`` holds the cone as a
    set when it is known in closed form.
    """

    dim: int
    mask: np.ndarray
    resolution: float = 1.0
    exact: Optional[SetSpec] = None

    @property
    def sphere(self) -> np.ndarray:
        return sphere_directions(self.dim, self.resolution)

    @property
    def directions(self) -> np.ndarray:
        return self.sphere[self.mask]

    @property
    def is_zero(self) -> bool:
        return not bool(np.any(self.mask))

    def __and__(self, other: "DirectionSet") -> "DirectionSet":
        _same_sphere(self, other)
        return DirectionSet(self.dim, self.mask & other.mask, self.resolution)

    def issubset(self, other: "DirectionSet", angular_tol: float = DEFAULT_ANGULAR_TOL) -> bool:
        if self.is_zero:
            return True
        if other.is_zero:
            return False
        return _directed(self.directions, other.directions) <= angular_tol

    def hausdorff(self, other: "DirectionSet") -> float:
        """Angular Hausdorff distance in degrees; {0} is far from any cone."""
        if self.is_zero and other.is_zero:
            return 0.0
        if self.is_zero or other.is_zero:
            return math.inf
        a, b = self.directions, other.directions
        return max(_directed(a, b), _directed(b, a))

    def as_dict(self) -> dict:
        out = {"zero": self.is_zero, "count": int(np.sum(self.mask))}
        if self.dim == 2 and not self.is_zero:
            ang = np.degrees(np.arctan2(self.directions[:, 1], self.directions[:, 0]))
            out["angles_deg"] = np.round(np.sort(ang), 6).tolist()
        if self.exact is not None:
            out["exact"] = self.exact.to_dict()
        return out


def _same_sphere(a: DirectionSet, b: DirectionSet):
    if a.dim != b.dim or a.resolution != b.resolution:
        raise ValueError("direction sets live on different sphere grids")


def _directed(a: np.ndarray, b: np.ndarray) -> float:
    cos = np.clip(a @ b.T, -1.0, 1.0)
    return float(np.degrees(np.max(np.arccos(np.max(cos, axis=1)))))


# ---------------------------------------------------------------------------
# sampled sets
# ---------------------------------------------------------------------------

class _GammaGrid:
    """f on the x-part and f^g on the x*-part of a product grid."""

    def __init__(self, gamma: GammaFn, grid: GridSpec):
        n = gamma.g.n
        if grid.dim != n + gamma.g.m:
            raise ValueError(f"grid must have dimension n + m = {n + gamma.g.m}")
        self.grid = grid
        xbox, cbox = grid.box.split(n)
        ppd = grid.points_per_dim
        self.X = GridSpec(xbox, ppd, 0).points()
        self.XS = GridSpec(cbox, ppd, 0).points()
        self.F = gamma.f(self.X)
        self.G = gamma.conjugate_many(self.XS)

    def below(self, lam: float, tol: float) -> np.ndarray:
        keep_x = np.flatnonzero(self.F < math.inf)
        keep_c = np.flatnonzero(self.G < math.inf)
        vals = self.F[keep_x][:, None] + self.G[keep_c][None, :]
        i, j = np.nonzero(vals <= lam + tol)
        return np.concatenate([self.X[keep_x[i]], self.XS[keep_c[j]]], axis=1)


_grid_cache: dict = {}


def _gamma_grid(gamma: GammaFn, grid: GridSpec) -> _GammaGrid:
    key = (id(gamma), grid)
    hit = _grid_cache.get(key)
    if hit is None or hit[0] is not gamma:
        if len(_grid_cache) > 32:
            _grid_cache.clear()
        hit = (gamma, _GammaGrid(gamma, grid))
        _grid_cache[key] = hit
    return hit[1]


def _as_grid(box: Union[Box, GridSpec], resolution: Optional[int]) -> GridSpec:
    if isinstance(box, GridSpec):
        return box
    return GridSpec(box, resolution or 41, 0)


def level_set_sample(gamma: GammaFn, lam: float, box: Union[Box, GridSpec],
                     resolution: Optional[int] = None, tol: float = DEFAULT_TOL) -> PointCloud:
    """Grid points (x, x*) of ``box`` with gamma(x, x*) <= lam + tol.

    Examples
    --------
    A negative level is empty since gamma >= 0 for members:

    >>> from gcoupling.coupling import ProperFn, builtin_coupling
    >>> from gcoupling.conjugate import g_conjugate
    >>> f = ProperFn(1, lambda x: x[..., 0] ** 2)
    >>> g = builtin_coupling("square_product")
    >>> xg = GridSpec.centered(5, 1, 51)
    >>> gam = GammaFn(f, g, g_conjugate(f, g, GridSpec.centered(2, 1, 41), xg), xg)
    >>> len(level_set_sample(gam, -1.0, Box.centered(2, 2), 41))
    0
    """
    grid = _as_grid(box, resolution)
    pts = _gamma_grid(gamma, grid).below(lam, tol)
    return PointCloud(pts, grid.box, f"level {lam:g}")


def zero_set(gamma: GammaFn, box: Union[Box, GridSpec], resolution: Optional[int] = None,
             tol: float = DEFAULT_TOL) -> PointCloud:
    """Grid points where gamma <= tol: the primal-dual solution pairs."""
    grid = _as_grid(box, resolution)
    pts = _gamma_grid(gamma, grid).below(0.0, tol)
    return PointCloud(pts, grid.box, "zero set")


def _inner_radius(box: Box) -> float:
    lo, hi = box.lo_array, box.hi_array
    if np.any(lo > 0) or np.any(hi < 0):
        return 0.0
    return float(np.min(np.minimum(-lo, hi)))


def default_ladder(box: Box) -> list[float]:
    r = _inner_radius(box)
    return [r / 16, r / 8, r / 4, r / 2]


def recession_directions(A: Union[PointCloud, SetSpec], ladder: Optional[Sequence[float]] = None,
                         angular_tol: float = DEFAULT_ANGULAR_TOL,
                         resolution: float = 1.0) -> DirectionSet:
    """Approximate A^infinity on the sphere grid (exact for analytic sets)."""
    if isinstance(A, SetSpec):
        cone = A.recession_cone()
        sphere = sphere_directions(A.dim, resolution)
        mask = cone.contains(sphere, tol=1e-9)
        return DirectionSet(A.dim, mask, resolution, exact=cone)

    sphere = sphere_directions(A.dim, resolution)
    if A.empty:
        return DirectionSet(A.dim, np.zeros(len(sphere), dtype=bool), resolution)
    ladder = sorted(default_ladder(A.box) if ladder is None else ladder)
    if not ladder or ladder[0] <= 0:
        raise ValueError("radius ladder must be positive")
    if ladder[-1] > _inner_radius(A.box):
        raise ValueError("sampling box is too small to host the largest rung")

    norms = np.linalg.norm(A.points, axis=1)
    far = norms >= ladder[0]
    pts, norms = A.points[far], norms[far]
    best = np.zeros(len(sphere))
    if len(pts):
        units = pts / norms[:, None]
        # keep only the farthest point in each small angular bin
        q = math.radians(angular_tol) / 16
        keys = np.round(units / q).astype(np.int64)
        base = 2 * int(math.ceil(1 / q)) + 3
        if base ** A.dim < 2 ** 62:
            packed = np.zeros(len(keys), dtype=np.int64)
            for c in range(A.dim):
                packed = packed * base + (keys[:, c] + base // 2)
            order = np.lexsort((-norms, packed))
            packed = packed[order]
            first = np.flatnonzero(np.r_[True, packed[1:] != packed[:-1]])
            keep = np.sort(order[first])
            units, norms = units[keep], norms[keep]
        cos_tol = math.cos(math.radians(angular_tol))
        step = max(1, 4_000_000 // len(sphere))
        for s in range(0, len(units), step):
            near = (sphere @ units[s:s + step].T) >= cos_tol - 1e-12
            cand = np.where(near, norms[None, s:s + step], 0.0)
            best = np.maximum(best, cand.max(axis=1))
    mask = np.ones(len(sphere), dtype=bool)
    for r in ladder:
        mask &= best >= r
    return DirectionSet(A.dim, mask, resolution)


# ---------------------------------------------------------------------------
# R(gamma) and the compactness theorem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecessionSetup:
    """Grids and tolerances shared by the recession experiments.

    ``work`` is a moderate grid where the zero set is located and the
    definitional sample is drawn; ``far`` is a large grid on which recession
    directions are read off.
    """

    work: GridSpec
    far: GridSpec
    ladder_k: int = 10
    samples: int = 16
    angular_tol: float = DEFAULT_ANGULAR_TOL
    resolution: float = 1.0
    tol: float = DEFAULT_TOL
    seed: int = 0

    @classmethod
    def default(cls, dim: int, work_radius: float = 2.0, far_radius: float = 4096.0,
                work_points: int = 41, far_points: int = 801, **kw) -> "RecessionSetup":
        return cls(GridSpec(Box.centered(work_radius, dim), work_points, 0),
                   GridSpec(Box.centered(far_radius, dim), far_points, 0), **kw)


def _directions_of_level(gamma: GammaFn, lam: float, setup: RecessionSetup) -> DirectionSet:
    cloud = level_set_sample(gamma, lam, setup.far, tol=setup.tol)
    return recession_directions(cloud, angular_tol=setup.angular_tol, resolution=setup.resolution)


def _intersect(sets: list[DirectionSet], dim: int, resolution: float) -> DirectionSet:
    out = DirectionSet(dim, np.ones(len(sphere_directions(dim, resolution)), dtype=bool), resolution)
    for s in sets:
        out = out & s
    return out


def _ladder_route(gamma: GammaFn, setup: RecessionSetup) -> DirectionSet:
    dim = setup.far.dim
    levels = [2.0 ** -k for k in range(setup.ladder_k + 1)]
    return _intersect([_directions_of_level(gamma, lam, setup) for lam in levels],
                      dim, setup.resolution)


def _definitional_route(gamma: GammaFn, setup: RecessionSetup) -> DirectionSet:
    gg = _gamma_grid(gamma, setup.work)
    finite_x = np.flatnonzero(gg.F < math.inf)
    finite_c = np.flatnonzero(gg.G < math.inf)
    if not len(finite_x) or not len(finite_c):
        raise ValueError("gamma is nowhere finite on the working grid")
    rng = np.random.default_rng(setup.seed)
    i = rng.choice(finite_x, size=setup.samples)
    j = rng.choice(finite_c, size=setup.samples)
    levels = sorted(set((gg.F[i] + gg.G[j]).tolist()))
    zero = gg.below(0.0, setup.tol)
    if len(zero):
        levels = [0.0] + levels
    return _intersect([_directions_of_level(gamma, lam, setup) for lam in levels],
                      setup.far.dim, setup.resolution)


def R_gamma(gamma: GammaFn, setup: RecessionSetup, route: str = "auto") -> DirectionSet:
    """R(gamma), the intersection of the recession cones of the level sets.

    ``route="auto"`` uses the definitional intersection over sampled levels
    when the zero set is non-empty and the ladder lambda_k = 2^-k otherwise.
    """
    if route == "auto":
        route = "definitional" if not zero_set(gamma, setup.work, tol=setup.tol).empty else "ladder"
    if route == "ladder":
        return _ladder_route(gamma, setup)
    if route == "definitional":
        return _definitional_route(gamma, setup)
    raise ValueError(f"unknown route {route!r}")


def _bounded_under_doubling(gamma: GammaFn, grid: GridSpec, lam: Optional[float],
                            tol: float) -> bool:
    wide = grid.with_box(grid.box.doubled())
    if lam is None:
        a, b = zero_set(gamma, grid, tol=tol), zero_set(gamma, wide, tol=tol)
    else:
        a, b = level_set_sample(gamma, lam, grid, tol=tol), level_set_sample(gamma, lam, wide, tol=tol)
    return b.max_norm() <= a.max_norm() + 1e-12


def compactness_verdict(gamma: GammaFn, setup: RecessionSetup) -> dict:
    """Evaluate both sides of the compactness equivalence and its lemmas."""
    m = zero_set(gamma, setup.work, tol=setup.tol)
    m_nonempty = not m.empty
    m_bounded = _bounded_under_doubling(gamma, setup.work, None, setup.tol) if m_nonempty else True
    ladder = _ladder_route(gamma, setup)
    definitional = _definitional_route(gamma, setup)
    R = definitional if m_nonempty else ladder
    if m_nonempty:
        m_far = zero_set(gamma, setup.far, tol=setup.tol)
        m_inf = recession_directions(m_far, angular_tol=setup.angular_tol,
                                     resolution=setup.resolution)
    else:
        m_inf = DirectionSet(setup.far.dim, np.zeros(len(R.mask), dtype=bool), setup.resolution)

    r_zero = R.is_zero
    m_compact = m_nonempty and m_bounded
    lpt_rhs = m_inf.hausdorff(R) > setup.angular_tol
    s1 = level_set_sample(gamma, 1.0, setup.far, tol=setup.tol)
    s1_bounded = recession_directions(s1, angular_tol=setup.angular_tol,
                                      resolution=setup.resolution).is_zero
    routes_gap = ladder.hausdorff(definitional)
    return {
        "R": R.as_dict(),
        "R_is_zero": r_zero,
        "m_nonempty": m_nonempty,
        "m_bounded": m_bounded,
        "m_compact": m_compact,
        "m_size": len(m),
        "m_recession": m_inf.as_dict(),
        "theorem_equivalence": r_zero == m_compact,
        "lemma_l1_inclusion": m_inf.issubset(R, setup.angular_tol),
        "lemma_lpt": (not m_nonempty) == lpt_rhs,
        "ladder_vs_definitional_deg": routes_gap,
        "ladder_agrees": routes_gap <= setup.angular_tol,
        "S1_bounded": s1_bounded,
        "prop1_ii": (not s1_bounded) or m_nonempty,
        "lsc": "assumed",
    }
