"""Problem files: JSON or YAML documents describing an experiment.

Variable names used by expressions:

* ``x1..xn``   primal point (``f``, constraints, ``phi``, EP first slot)
* ``s1..sm``   dual point x* (expression couplings)
* ``y1..yn``   EP / EPVIP second slot
* ``u1..up``   perturbation parameter
* ``k``        family index in closure experiments

See ``problems/`` for one annotated file per experiment type.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .coupling import BUILTINS, CouplingFn, ProperFn, builtin_coupling
from .extreal import DEFAULT_RADIUS, DEFAULT_TOL, Box, GridSpec
from .funcdsl import DSLError, parse
from .sets import SetSpec, SetSpecError, set_from_dict

__all__ = [
    "SchemaError",
    "Numeric",
    "Problem",
    "load_problem",
]


class SchemaError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


@dataclass(frozen=True)
class Numeric:
    tol: float = DEFAULT_TOL
    radius: float = DEFAULT_RADIUS
    points_per_dim: int = 201
    refinement_rounds: int = 2
    seed: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _names(prefix: str, k: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(1, k + 1)]


def _get(d: dict, key: str, path: str, default: Any = ...):
    if not isinstance(d, dict):
        raise SchemaError(path, "expected a mapping")
    if key not in d:
        if default is ...:
            raise SchemaError(f"{path}.{key}".lstrip("."), "missing required field")
        return default
    return d[key]


class Problem:
    """A parsed problem document with typed accessors for each section."""

    def __init__(self, doc: dict, source: str = "<memory>", overrides: Optional[dict] = None):
        if not isinstance(doc, dict):
            raise SchemaError("", "a problem file must be a mapping")
        self.doc = doc
        self.source = source
        num = dict(doc.get("numeric") or {})
        num.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            self.numeric = Numeric(**num)
        except TypeError as exc:
            raise SchemaError("numeric", str(exc)) from None
        dims = doc.get("dims") or {}
        self.n = int(dims.get("n", 1))
        self.m = int(dims.get("m", self.n))

    # -- expressions -------------------------------------------------------

    def expr(self, text, groups: list[tuple[str, int]], path: str):
        """Parse an expression and bind it to arrays, one per variable group."""
        if isinstance(text, (int, float)):
            text = repr(float(text))
        if not isinstance(text, str):
            raise SchemaError(path, "expected an expression string")
        names = [v for prefix, size in groups for v in
                 ([prefix] if size == 0 else _names(prefix, size))]
        try:
            fn = parse(text, names)
        except DSLError as exc:
            raise SchemaError(path, str(exc)) from None
        sizes = [max(size, 1) for _, size in groups]
        bound = fn.bind(*sizes)
        scalar = [size == 0 for _, size in groups]

        def call(*arrays):
            arrays = [np.asarray(a, float)[..., None] if sc else a for a, sc in zip(arrays, scalar)]
            return bound(*arrays)

        return call

    def setspec(self, spec, path: str, dim: Optional[int] = None) -> SetSpec:
        try:
            return set_from_dict(spec, dim)
        except (SetSpecError, KeyError, TypeError) as exc:
            raise SchemaError(path, f"bad set: {exc}") from None

    # -- f and g -----------------------------------------------------------

    def f(self, key: str = "f", n: Optional[int] = None) -> ProperFn:
        n = n or self.n
        spec = _get(self.doc, key, "")
        if isinstance(spec, str):
            spec = {"expr": spec}
        fn = self.expr(_get(spec, "expr", key), [("x", n)], f"{key}.expr")
        dom = self.setspec(spec["dom"], f"{key}.dom", n) if "dom" in spec else None
        return ProperFn(n, fn, dom, name=str(spec["expr"]))

    def g(self, f: Optional[ProperFn] = None) -> CouplingFn:
        spec = _get(self.doc, "g", "")
        if isinstance(spec, str):
            spec = {"builtin": spec}
        if "builtin" in spec:
            name = spec["builtin"]
            if name not in BUILTINS:
                raise SchemaError("g.builtin", f"unknown coupling {name!r}")
            params = dict(spec.get("params") or {})
            if "K" in params:
                params["K"] = self.setspec(params["K"], "g.params.K", self.n)
            if name == "norm_on_dom":
                params.setdefault("dom", f if f is not None else self.f())
                params.setdefault("m", self.m)
            if name in ("exp", "square_product"):
                params.setdefault("dim", self.n)
            if name in ("max_dot", "min_dot"):
                params.setdefault("n", self.n)
            if name == "lagrangian_g1":
                params.setdefault("m", self.m)
            try:
                return builtin_coupling(name, **params)
            except (ValueError, KeyError) as exc:
                raise SchemaError("g.params", str(exc)) from None
        fn = self.expr(_get(spec, "expr", "g"), [("x", self.n), ("s", self.m)], "g.expr")
        C = self.setspec(_get(spec, "C", "g"), "g.C", self.m)
        return CouplingFn.extended(self.n, self.m, fn, C, name="expr",
                                   params={"expr": spec["expr"]})

    # -- grids ---------------------------------------------------------------

    def grid(self, key: str, dim: int, default_radius: Optional[float] = None,
             default_points: Optional[int] = None, default_rounds: Optional[int] = None,
             region: Optional[SetSpec] = None) -> GridSpec:
        """Grid from ``grids.<key>``: ``{lo, hi}`` or ``{radius}``, plus points/rounds.

        Without explicit bounds the box is ``region``'s bounding box (when a
        set is given) or a centered box.
        """
        spec = (self.doc.get("grids") or {}).get(key) or {}
        path = f"grids.{key}"
        ppd = int(spec.get("points", default_points or self.numeric.points_per_dim))
        rounds = int(spec.get("rounds", self.numeric.refinement_rounds
                              if default_rounds is None else default_rounds))
        if "lo" in spec or "hi" in spec:
            lo = np.broadcast_to(np.asarray(_get(spec, "lo", path), float), (dim,))
            hi = np.broadcast_to(np.asarray(_get(spec, "hi", path), float), (dim,))
            box = Box(tuple(lo.tolist()), tuple(hi.tolist()))
        else:
            radius = float(spec.get("radius", default_radius or self.numeric.radius))
            box = region.bounding_box(radius) if region is not None else Box.centered(radius, dim)
        try:
            return GridSpec(box, ppd, rounds)
        except ValueError as exc:
            raise SchemaError(path, str(exc)) from None

    def section(self, key: str) -> dict:
        sec = _get(self.doc, key, "")
        if not isinstance(sec, dict):
            raise SchemaError(key, "expected a mapping")
        return sec

    def echo(self) -> dict:
        return self.doc


def load_problem(path, overrides: Optional[dict] = None) -> Problem:
    """Read a problem file (``.json``, ``.yaml`` or ``.yml``)."""
    p = Path(path)
    text = p.read_text()
    try:
        if p.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            doc = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise SchemaError("", f"cannot parse {p.name}: {exc}") from None
    return Problem(doc, str(p), overrides)
