"""Expression language for problem files.

Grammar (standard precedence, ``^`` right-associative)::

    expr     := additive [("<" | "<=" | ">" | ">=" | "==") additive]
    additive := term (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := "-" unary | power
    power    := primary ["^" unary]
    primary  := NUMBER | "inf" | NAME | NAME "(" args ")" | "(" expr ")"
              | "[" args "]"            (vector literal, only inside dot)

Functions: ``exp ln abs sqrt max(a,b) min(a,b) dot(v,w) if(c,a,b)``.
Inside ``dot`` a bare group name such as ``x`` stands for ``[x1, ..., xn]``.

Evaluation is vectorized: variables may be numpy arrays of any mutually
broadcastable shapes.  ``ln`` of a nonpositive number is ``-inf``, ``a/0``
is ``±inf`` by the sign of ``a``, and ``0*inf``, ``inf-inf``, ``0/0`` and
other NaN-producing operations raise :class:`DomainError`.  The branches of
``if`` are evaluated only where they are selected.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .extreal import EvaluationError

__all__ = [
    "DSLError",
    "ParseError",
    "UnknownIdentifier",
    "ArityError",
    "DomainError",
    "ExprFn",
    "parse",
    "evaluate",
    "to_text",
    "depth",
]


class DSLError(Exception):
    pass


class ParseError(DSLError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ParseError):
    pass


class ArityError(ParseError):
    pass


class DomainError(EvaluationError):
    pass


# ---------------------------------------------------------------------------
# syntax tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class VecVar:
    name: str
    indices: tuple


@dataclass(frozen=True)
class Vec:
    items: tuple


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, VecVar, Vec, Neg, Bin, Call]

_FUNCS = {"exp": 1, "ln": 1, "abs": 1, "sqrt": 1, "max": 2, "min": 2, "dot": 2, "if": 3}
_CMP = ("<=", ">=", "==", "<", ">")

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|==|[-+*/^(),<>\[\]])
""", re.VERBOSE)


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", len(text[:pos].encode()))
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group(), len(text[:pos].encode())))
        pos = m.end()
    out.append(("end", "", len(text.encode())))
    return out


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.toks = _tokenize(text)
        self.i = 0
        self.vars = {v: k for k, v in enumerate(variables)}
        groups: dict[str, list[tuple[int, int]]] = {}
        for k, v in enumerate(variables):
            m = re.fullmatch(r"([A-Za-z_]+)(\d+)", v)
            if m:
                groups.setdefault(m.group(1), []).append((int(m.group(2)), k))
        self.groups = {g: tuple(k for _, k in sorted(items)) for g, items in groups.items()}

    @property
    def tok(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        kind, text, off = self.tok
        if text != value or kind == "end":
            what = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {what}", off)
        self.i += 1

    def parse(self):
        node = self.expr()
        kind, text, off = self.tok
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", off)
        return node

    def expr(self):
        left = self.additive()
        if self.tok[1] in _CMP and self.tok[0] == "op":
            op = self.next()[1]
            left = Bin(op, left, self.additive())
        return left

    def additive(self):
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.next()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.next()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.next()
            return Bin("^", base, self.unary())
        return base

    def primary(self, vector_ok: bool = False):
        kind, text, off = self.next()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text == "inf":
                return Num(math.inf)
            if self.tok[1] == "(" and self.tok[0] == "op":
                return self.call(text, off)
            if text in self.vars:
                return Var(text, self.vars[text])
            if vector_ok and text in self.groups:
                return VecVar(text, self.groups[text])
            raise UnknownIdentifier(f"unknown identifier {text!r}", off)
        if text == "(" and kind == "op":
            node = self.expr()
            self.expect(")")
            return node
        if text == "[" and kind == "op" and vector_ok:
            items = self.args("]")
            return Vec(tuple(items))
        what = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {what}", off)

    def args(self, close: str, vector_ok: bool = False):
        items = []
        if self.tok[1] == close and self.tok[0] == "op":
            self.next()
            return items
        while True:
            if vector_ok:
                items.append(self.vector_arg())
            else:
                items.append(self.expr())
            if self.tok[1] == "," and self.tok[0] == "op":
                self.next()
                continue
            self.expect(close)
            return items

    def vector_arg(self):
        kind, text, _ = self.tok
        if kind == "op" and text == "[":
            return self.primary(vector_ok=True)
        if kind == "name" and text in self.groups and text not in self.vars:
            return self.primary(vector_ok=True)
        return self.expr()

    def call(self, name, off):
        if name not in _FUNCS:
            raise UnknownIdentifier(f"unknown function {name!r}", off)
        self.expect("(")
        args = self.args(")", vector_ok=(name == "dot"))
        if len(args) != _FUNCS[name]:
            raise ArityError(f"{name} takes {_FUNCS[name]} arguments, got {len(args)}", off)
        if name == "dot":
            sizes = [len(a.items) if isinstance(a, Vec) else len(a.indices)
                     if isinstance(a, VecVar) else None for a in args]
            if None in sizes:
                raise ParseError("dot expects vector arguments", off)
            if sizes[0] != sizes[1]:
                raise ArityError(f"dot of vectors of length {sizes[0]} and {sizes[1]}", off)
        return Call(name, tuple(args))


# ---------------------------------------------------------------------------
# public objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExprFn:
    """A parsed expression over a fixed, ordered list of scalar variables."""

    variables: tuple
    body: object

    @property
    def arity(self) -> int:
        return len(self.variables)

    def __call__(self, *env):
        return evaluate(self, env)

    def text(self) -> str:
        return to_text(self)

    def bind(self, *groups: int):
        """Return ``f(P1, P2, ...)`` taking one array ``(..., k)`` per group.

        ``groups`` gives the sizes of consecutive variable blocks, e.g.
        ``expr.bind(n, m)`` for an expression in ``x1..xn, s1..sm``.
        """
        if sum(groups) != self.arity:
            raise ValueError(f"group sizes {groups} do not cover {self.arity} variables")

        def fn(*arrays):
            cols = []
            for size, arr in zip(groups, arrays):
                arr = np.asarray(arr, dtype=float)
                cols.extend(arr[..., j] for j in range(size))
            return evaluate(self, cols)

        return fn


def parse(text: str, declared_vars: Sequence[str]) -> ExprFn:
    """Parse ``text`` into an immutable :class:`ExprFn`.

    >>> depth(parse("x1^2 + exp(x2)", ["x1", "x2"]))
    3
    """
    return ExprFn(tuple(declared_vars), _Parser(text, declared_vars).parse())


def depth(e) -> int:
    node = e.body if isinstance(e, ExprFn) else e
    if isinstance(node, (Num, Var, VecVar)):
        return 1
    if isinstance(node, Neg):
        return 1 + depth(node.arg)
    if isinstance(node, Bin):
        return 1 + max(depth(node.left), depth(node.right))
    if isinstance(node, (Call, Vec)):
        kids = node.args if isinstance(node, Call) else node.items
        return 1 + max((depth(a) for a in kids), default=0)
    raise TypeError(node)


def _num_text(v: float) -> str:
    if v == math.inf:
        return "inf"
    return repr(float(v))


def to_text(e) -> str:
    """Canonical, fully parenthesized rendering that parses back to ``e``."""
    node = e.body if isinstance(e, ExprFn) else e
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, (Var, VecVar)):
        return node.name
    if isinstance(node, Vec):
        return "[" + ", ".join(to_text(a) for a in node.items) + "]"
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Bin):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}(" + ", ".join(to_text(a) for a in node.args) + ")"
    raise TypeError(node)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(e: ExprFn, env) -> np.ndarray | float:
    """Evaluate with extended-real semantics.

    ``env`` holds one scalar or array per declared variable.  Scalars in give a
    float out; arrays give an array of the broadcast shape.
    """
    if len(env) != e.arity:
        raise ValueError(f"expected {e.arity} values, got {len(env)}")
    arrays = [np.asarray(v, dtype=float) for v in env]
    scalar = all(a.ndim == 0 for a in arrays)
    shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
    flat = [np.broadcast_to(a, shape).ravel() for a in arrays]
    size = int(np.prod(shape)) if shape else 1
    with np.errstate(all="ignore"):
        out = _eval(e.body, flat, size)
    out = np.broadcast_to(out, (size,)).reshape(shape)
    if scalar:
        return float(out)
    return np.array(out, dtype=float)


def _fail(msg):
    raise DomainError(msg)


def _checked(values, msg):
    if np.isnan(values).any():
        _fail(msg)
    return values


def _mul(a, b):
    bad = ((a == 0) & np.isinf(b)) | (np.isinf(a) & (b == 0))
    if bad.any():
        _fail("0 * inf is undefined")
    return a * b


def _div(a, b):
    zero = b == 0
    if (a[zero] == 0).any():
        _fail("0 / 0 is undefined")
    out = np.where(zero, np.where(a > 0, np.inf, -np.inf), a / np.where(zero, 1.0, b))
    return _checked(out, "inf / inf is undefined")


def _eval(node, env, size):
    if isinstance(node, Num):
        return np.full(size, node.value)
    if isinstance(node, Var):
        return env[node.index]
    if isinstance(node, Neg):
        return -_eval(node.arg, env, size)
    if isinstance(node, Bin):
        a = np.broadcast_to(_eval(node.left, env, size), (size,))
        b = np.broadcast_to(_eval(node.right, env, size), (size,))
        op = node.op
        if op == "+":
            return _checked(a + b, "inf - inf is undefined")
        if op == "-":
            return _checked(a - b, "inf - inf is undefined")
        if op == "*":
            return _mul(a, b)
        if op == "/":
            return _div(a, b)
        if op == "^":
            return _checked(np.power(a, b), "undefined power")
        if op == "<":
            return (a < b).astype(float)
        if op == "<=":
            return (a <= b).astype(float)
        if op == ">":
            return (a > b).astype(float)
        if op == ">=":
            return (a >= b).astype(float)
        if op == "==":
            return (a == b).astype(float)
        raise AssertionError(op)
    if isinstance(node, Call):
        name = node.name
        if name == "if":
            cond = np.broadcast_to(_eval(node.args[0], env, size), (size,)) != 0
            out = np.empty(size)
            for mask, branch in ((cond, node.args[1]), (~cond, node.args[2])):
                if mask.any():
                    sub = [v[mask] for v in env]
                    out[mask] = _eval(branch, sub, int(mask.sum()))
            return out
        if name == "dot":
            v, w = (_vector(a, env, size) for a in node.args)
            total = np.zeros(size)
            for a, b in zip(v, w):
                total = _checked(total + _mul(a, b), "inf - inf in dot")
            return total
        args = [np.broadcast_to(_eval(a, env, size), (size,)) for a in node.args]
        if name == "exp":
            return np.exp(args[0])
        if name == "ln":
            x = args[0]
            return np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), -np.inf)
        if name == "abs":
            return np.abs(args[0])
        if name == "sqrt":
            return _checked(np.sqrt(args[0]), "sqrt of a negative number")
        if name == "max":
            return np.maximum(args[0], args[1])
        if name == "min":
            return np.minimum(args[0], args[1])
        raise AssertionError(name)
    raise TypeError(node)


def _vector(node, env, size):
    if isinstance(node, VecVar):
        return [env[k] for k in node.indices]
    if isinstance(node, Vec):
        return [np.broadcast_to(_eval(a, env, size), (size,)) for a in node.items]
    raise DomainError("dot expects vector arguments")
