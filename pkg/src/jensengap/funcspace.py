"""One-variable real expressions in ``t``: parsing, evaluation, convexity.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := number | "t" | fname "(" expr ("," expr)? ")" | "(" expr ")"
    fname  := exp | log | abs | min | max

``^`` binds tighter than unary minus, so ``-t^2`` is ``-(t^2)``; ``^`` is
right associative and everything else left associative.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, ParseError, ValidationError

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Const, Var, Neg, BinOp, Call]

FUNCTIONS = {"exp": 1, "log": 1, "abs": 1, "min": 2, "max": 2}


def Pow(base, exponent):
    return BinOp("^", base, exponent)


# ---------------------------------------------------------------------------
# Tokenizer and recursive-descent parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    raw = text.encode()
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:]
            if rest.strip() == "":
                break
            off = len(text[: pos + len(rest) - len(rest.lstrip())].encode())
            raise ParseError(f"unexpected character {rest.lstrip()[0]!r}", off)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), len(text[:start].encode())))
        pos = m.end()
    toks.append(_Tok("end", "", len(raw)))
    return toks


_ATOM_START = {"<number>", "t", "(", *FUNCTIONS}
_FACTOR_START = _ATOM_START | {"-"}


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected):
        tok = self.tok
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ParseError(f"unexpected {what}", tok.offset, expected)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.fail({text})

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail({"+", "-", "*", "/", "^", "<end>"})
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.accept("-"):
            return Neg(self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                raise ParseError(f"numeric literal {tok.text!r} overflows", tok.offset)
            self.i += 1
            return Const(value)
        if tok.kind == "name":
            if tok.text == "t":
                self.i += 1
                return Var()
            if tok.text in FUNCTIONS:
                self.i += 1
                self.expect("(")
                args = [self.expr()]
                if self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[tok.text]
                if len(args) != arity:
                    raise ParseError(
                        f"{tok.text} takes {arity} argument(s), got {len(args)}", tok.offset
                    )
                return Call(tok.text, tuple(args))
            raise ParseError(f"unknown name {tok.text!r}", tok.offset, _ATOM_START)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.fail(_FACTOR_START)


# ---------------------------------------------------------------------------
# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def _fmt_const(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def to_source(node: Node) -> str:
    """Render ``node`` with the fewest parentheses that reparse to the same tree."""
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        return "-" + (inner if _prec(node.arg) >= _PREC["neg"] else f"({inner})")
    p = _PREC[node.op]
    left, right = to_source(node.left), to_source(node.right)
    if node.op == "^":
        if _prec(node.left) < _PREC["atom"]:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# ---------------------------------------------------------------------------
# Evaluation


def _check(values: np.ndarray, what: str, node: Node) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise DomainError(f"{what} is not finite in {to_source(node)!r}")
    return values


def _eval(node: Node, t: np.ndarray) -> np.ndarray:
    if isinstance(node, Const):
        return np.full_like(t, node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -_eval(node.arg, t)
    if isinstance(node, Call):
        args = [_eval(a, t) for a in node.args]
        if node.name == "exp":
            return _check(np.exp(args[0]), "exp", node)
        if node.name == "log":
            if np.any(args[0] <= 0.0):
                raise DomainError(f"log of a nonpositive value in {to_source(node)!r}")
            return np.log(args[0])
        if node.name == "abs":
            return np.abs(args[0])
        if node.name == "min":
            return np.minimum(args[0], args[1])
        return np.maximum(args[0], args[1])
    a, b = _eval(node.left, t), _eval(node.right, t)
    if node.op == "+":
        return _check(a + b, "sum", node)
    if node.op == "-":
        return _check(a - b, "difference", node)
    if node.op == "*":
        return _check(a * b, "product", node)
    if node.op == "/":
        if np.any(b == 0.0):
            raise DomainError(f"division by zero in {to_source(node)!r}")
        return _check(a / b, "quotient", node)
    if np.any((a == 0.0) & (b < 0.0)):
        raise DomainError(f"zero raised to a negative power in {to_source(node)!r}")
    return _check(np.power(a, b), "power", node)


# ---------------------------------------------------------------------------
# Intervals and expressions


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValidationError(f"interval bounds out of order: [{self.lo}, {self.hi}]")
        # infinite endpoints are never members
        if math.isinf(self.lo) and self.lo_closed:
            object.__setattr__(self, "lo_closed", False)
        if math.isinf(self.hi) and self.hi_closed:
            object.__setattr__(self, "hi_closed", False)

    @classmethod
    def closed(cls, lo: float, hi: float) -> "Interval":
        return cls(float(lo), float(hi), True, True)

    @classmethod
    def coerce(cls, value) -> "Interval":
        if isinstance(value, Interval):
            return value
        lo, hi = value
        return cls.closed(lo, hi)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x: float) -> bool:
        lo_ok = x > self.lo or (self.lo_closed and x == self.lo)
        hi_ok = x < self.hi or (self.hi_closed and x == self.hi)
        return lo_ok and hi_ok

    def contains_interval(self, other: "Interval") -> bool:
        lo_ok = other.lo > self.lo or (other.lo == self.lo and (self.lo_closed or not other.lo_closed))
        hi_ok = other.hi < self.hi or (other.hi == self.hi and (self.hi_closed or not other.hi_closed))
        return lo_ok and hi_ok

    def __str__(self) -> str:
        return f"{'[' if self.lo_closed else '('}{self.lo}, {self.hi}{']' if self.hi_closed else ')'}"


REAL_LINE = Interval()


@dataclass(frozen=True)
class FuncExpr:
    """A parsed expression together with the interval it is meant to live on."""

    source: str
    ast: Node
    domain: Interval = REAL_LINE

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = _eval(self.ast, np.atleast_1d(arr).astype(float))
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)

    def __str__(self) -> str:
        return to_source(self.ast)

    def with_domain(self, domain) -> "FuncExpr":
        return FuncExpr(self.source, self.ast, Interval.coerce(domain))

    def compose(self, inner: "FuncExpr") -> "FuncExpr":
        """``self(inner(t))`` on ``inner``'s domain."""
        ast = _substitute(self.ast, inner.ast)
        return FuncExpr(to_source(ast), ast, inner.domain)

    def __neg__(self) -> "FuncExpr":
        ast = Neg(self.ast)
        return FuncExpr(to_source(ast), ast, self.domain)

    def __mul__(self, other: "FuncExpr") -> "FuncExpr":
        other_ast = other.ast if isinstance(other, FuncExpr) else Const(float(other))
        ast = BinOp("*", self.ast, other_ast)
        return FuncExpr(to_source(ast), ast, self.domain)

    def __truediv__(self, other: "FuncExpr") -> "FuncExpr":
        ast = BinOp("/", self.ast, other.ast)
        return FuncExpr(to_source(ast), ast, self.domain)


def _substitute(node: Node, replacement: Node) -> Node:
    if isinstance(node, Var):
        return replacement
    if isinstance(node, Const):
        return node
    if isinstance(node, Neg):
        return Neg(_substitute(node.arg, replacement))
    if isinstance(node, Call):
        return Call(node.name, tuple(_substitute(a, replacement) for a in node.args))
    return BinOp(node.op, _substitute(node.left, replacement), _substitute(node.right, replacement))


def parse_expr(text: str, domain=None) -> FuncExpr:
    if not text or not text.strip():
        raise ParseError("empty expression", 0, _FACTOR_START)
    ast = _Parser(text).parse()
    return FuncExpr(text, ast, REAL_LINE if domain is None else Interval.coerce(domain))


def as_expr(f) -> FuncExpr:
    return f if isinstance(f, FuncExpr) else parse_expr(str(f))


# ---------------------------------------------------------------------------
# Convexity

CONVEXITY_TOL = 1e-9
_ROUNDOFF_FLOOR = 64 * np.finfo(float).eps

STRICTLY_CONVEX = "strictly-convex"
CONVEX = "convex"
STRICTLY_CONCAVE = "strictly-concave"
CONCAVE = "concave"
AFFINE = "affine"
NEITHER = "neither"


@dataclass(frozen=True)
class ConvexityReport:
    classification: str
    grid: tuple
    second_differences: tuple
    # for "neither": (triple breaking convexity, triple breaking concavity)
    witness: tuple | None = None

    @property
    def is_convex(self) -> bool:
        return self.classification in (STRICTLY_CONVEX, CONVEX, AFFINE)

    @property
    def is_concave(self) -> bool:
        return self.classification in (STRICTLY_CONCAVE, CONCAVE, AFFINE)

    @property
    def is_strictly_convex(self) -> bool:
        return self.classification == STRICTLY_CONVEX


def check_convexity(f, interval, grid_size: int = 64, tol: float = CONVEXITY_TOL) -> ConvexityReport:
    """Classify ``f`` on ``interval`` from second differences on a uniform grid.

    Each difference ``f(x-h) - 2 f(x) + f(x+h)`` is compared against
    ``tol * max(1, |f|) * min(1, h^2)``, with ``|f|`` taken over its own three
    points, and never against less than a roundoff floor of ``64 eps`` times
    that scale. The ``h^2`` factor keeps narrow intervals from reading as
    affine just because second differences shrink like ``h^2``.
    """
    f = as_expr(f)
    interval = Interval.coerce(interval)
    if grid_size < 16:
        raise ValidationError(f"grid_size must be at least 16, got {grid_size}")
    if not interval.bounded:
        raise ValidationError("convexity check needs a bounded interval")
    if not f.domain.contains_interval(interval):
        raise ValidationError(f"interval {interval} is not inside the domain {f.domain} of {f}")
    lo, hi = interval.lo, interval.hi
    # open ends are probed just inside
    if not interval.lo_closed:
        lo = lo + (hi - lo) * 1e-9
    if not interval.hi_closed:
        hi = hi - (hi - lo) * 1e-9
    grid = np.linspace(lo, hi, grid_size)
    fx = f(grid)
    d2 = fx[:-2] - 2.0 * fx[1:-1] + fx[2:]
    scale = np.maximum.reduce([np.ones_like(d2), np.abs(fx[:-2]), np.abs(fx[1:-1]), np.abs(fx[2:])])
    h = float(grid[1] - grid[0])
    thresh = np.maximum(tol * min(1.0, h * h) * scale, _ROUNDOFF_FLOOR * scale)
    pos = d2 > thresh
    neg = d2 < -thresh
    witness = None
    if not neg.any() and not pos.any():
        label = AFFINE
    elif not neg.any():
        label = STRICTLY_CONVEX if pos.all() else CONVEX
    elif not pos.any():
        label = STRICTLY_CONCAVE if neg.all() else CONCAVE
    else:
        label = NEITHER
        i, j = int(np.argmin(d2 / scale)), int(np.argmax(d2 / scale))
        witness = (tuple(grid[i : i + 3]), tuple(grid[j : j + 3]))
    return ConvexityReport(label, tuple(grid), tuple(d2), witness)


def classify_on_points(f, points: Sequence[float], grid_size: int = 64) -> ConvexityReport | None:
    """Convexity of ``f`` over the hull of ``points``; None if the hull is a point."""
    lo, hi = float(np.min(points)), float(np.max(points))
    if lo == hi:
        return None
    return check_convexity(f, Interval.closed(lo, hi), grid_size)
