"""Symbolic scalar functions of the tangential variables x' = (x1, ..., xn).

The grammar is closed: constants, variables, + - * /, integer powers and the
unary functions sin, cos, atan, exp.  Every node is an immutable value, so
trees can be shared freely (the elimination code relies on that to keep
nested substitutions small).

Text grammar (see docs/grammar.md for the EBNF)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" ["-"] INT | "^" "(" ["-"] INT ")")?
    atom   := NUMBER | "pi" | VAR | FUNC "(" expr ")" | "(" expr ")"
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Call",
    "FUNCTIONS", "ParseError", "ExprSyntaxError", "UnknownIdentifierError",
    "VariableRangeError", "EvaluationError", "ExprGridProfile",
    "parse_expr", "to_text", "differentiate", "eval_expr", "evaluate",
    "sample_expr", "const", "var", "max_var_index", "is_constant_node",
    "numerically_equal", "normalize", "grid_axes", "grid_points",
]


class Expr:
    """Base class of expression nodes.  Operators build simplified trees."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("only integer powers are part of the grammar")
        return power(self, int(n))

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    index: int  # 1-based, x1 ... xn


@dataclass(frozen=True, eq=True, repr=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True, eq=True, repr=True)
class Call(Expr):
    name: str
    arg: Expr


FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "atan": np.arctan,
    "exp": np.exp,
}

ZERO = Const(0.0)
ONE = Const(1.0)


def const(value: float) -> Const:
    return Const(float(value))


def var(index: int) -> Var:
    return Var(int(index))


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)):
        return Const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


# ---------------------------------------------------------------------------
# simplifying constructors (constant folding and 0/1 identities only)

def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    if isinstance(b, Const) and b.value < 0:
        return Sub(a, Const(-b.value))
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    if isinstance(b, Const) and not isinstance(a, Const):
        a, b = b, a
    if isinstance(a, Const) and isinstance(b, Mul) and isinstance(b.left, Const):
        return mul(Const(a.value * b.left.value), b.right)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is(b, 1.0):
        return a
    if _is(b, -1.0):
        return neg(a)
    if _is(a, 0.0) and not (isinstance(b, Const) and b.value == 0.0):
        return ZERO
    return Div(a, b)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const) and not (a.value == 0.0 and n < 0):
        return Const(a.value ** n)
    return Pow(a, n)


def call(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise UnknownIdentifierError(f"unknown function '{name}'", 0)
    if isinstance(a, Const):
        return Const(float(FUNCTIONS[name](a.value)))
    return Call(name, a)


# ---------------------------------------------------------------------------
# parsing

class ParseError(ValueError):
    """Malformed expression text.  ``offset`` is a byte offset into the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class ExprSyntaxError(ParseError):
    pass


class UnknownIdentifierError(ParseError):
    pass


class VariableRangeError(ParseError):
    pass


_TOKEN = re.compile(
    r"(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)
_VAR = re.compile(r"x([1-9][0-9]*)$")


class _Parser:
    def __init__(self, text: str, n_vars: int):
        self.text = text
        self.n_vars = n_vars
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if m is None:
                raise ExprSyntaxError(f"unexpected character {text[pos]!r}", self._byte(pos))
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def _byte(self, char_pos: int) -> int:
        return len(self.text[:char_pos].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", self._byte(pos))

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", self._byte(pos))
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.unary()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            inner = self.unary()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            paren = False
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                self.take()
                paren = True
            sign = 1
            if self.peek()[1] == "-" and self.peek()[0] == "op":
                self.take()
                sign = -1
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", self._byte(pos))
            if paren:
                self.expect(")")
            return Pow(base, sign * int(text))
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text == "pi":
                return Const(math.pi)
            m = _VAR.match(text)
            if m:
                index = int(m.group(1))
                if index > self.n_vars:
                    raise VariableRangeError(
                        f"variable {text} out of range (n_vars={self.n_vars})", self._byte(pos))
                return Var(index)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", self._byte(pos))
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", self._byte(pos))


def parse_expr(text: str, n_vars: int) -> Expr:
    """Parse ``text`` into an expression over x1..x{n_vars}."""
    return _Parser(text, n_vars).parse()


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt_number(x: float) -> str:
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        return _PREC_NEG if (e.value < 0 or math.copysign(1.0, e.value) < 0) else _PREC_ATOM
    if isinstance(e, (Add, Sub)):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def to_text(e: Expr) -> str:
    """Print with minimal parentheses; ``parse_expr(to_text(e))`` rebuilds ``e``."""

    def wrap(child: Expr, minimum: int) -> str:
        s = go(child)
        return f"({s})" if _prec(child) < minimum else s

    def go(e: Expr) -> str:
        if isinstance(e, Const):
            if not math.isfinite(e.value):
                raise ValueError("non-finite constant cannot be printed")
            return _fmt_number(e.value)
        if isinstance(e, Var):
            return f"x{e.index}"
        if isinstance(e, Neg):
            return "-" + wrap(e.arg, _PREC_NEG)
        if isinstance(e, (Add, Sub)):
            op = " + " if isinstance(e, Add) else " - "
            return wrap(e.left, _PREC_ADD) + op + wrap(e.right, _PREC_ADD + 1)
        if isinstance(e, (Mul, Div)):
            op = "*" if isinstance(e, Mul) else "/"
            return wrap(e.left, _PREC_MUL) + op + wrap(e.right, _PREC_MUL + 1)
        if isinstance(e, Pow):
            exp = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
            return wrap(e.base, _PREC_ATOM) + "^" + exp
        if isinstance(e, Call):
            return f"{e.name}({go(e.arg)})"
        raise TypeError(f"not an expression node: {e!r}")

    return go(e)


# ---------------------------------------------------------------------------
# structure queries

def max_var_index(e: Expr) -> int:
    """Largest variable index used (0 for a constant expression)."""
    seen: dict[int, int] = {}

    def go(e: Expr) -> int:
        key = id(e)
        if key in seen:
            return seen[key]
        if isinstance(e, Var):
            r = e.index
        elif isinstance(e, Const):
            r = 0
        elif isinstance(e, (Neg, Call)):
            r = go(e.arg)
        elif isinstance(e, Pow):
            r = go(e.base)
        else:
            r = max(go(e.left), go(e.right))
        seen[key] = r
        return r

    return go(e)


def is_constant_node(e: Expr) -> bool:
    """True when the tree contains no variable at all."""
    return max_var_index(e) == 0


# ---------------------------------------------------------------------------
# differentiation

def differentiate(e: Expr, axis: int) -> Expr:
    """Exact derivative d e / d x_axis (axis is 1-based)."""
    if axis < 1:
        raise ValueError("axis is 1-based")
    memo: dict[int, Expr] = {}

    def d(e: Expr) -> Expr:
        key = id(e)
        if key in memo:
            return memo[key]
        if isinstance(e, Const):
            r = ZERO
        elif isinstance(e, Var):
            r = ONE if e.index == axis else ZERO
        elif isinstance(e, Neg):
            r = neg(d(e.arg))
        elif isinstance(e, Add):
            r = add(d(e.left), d(e.right))
        elif isinstance(e, Sub):
            r = sub(d(e.left), d(e.right))
        elif isinstance(e, Mul):
            r = add(mul(d(e.left), e.right), mul(e.left, d(e.right)))
        elif isinstance(e, Div):
            da, db = d(e.left), d(e.right)
            if _is(db, 0.0):
                r = div(da, e.right)
            else:
                r = div(sub(mul(da, e.right), mul(e.left, db)), power(e.right, 2))
        elif isinstance(e, Pow):
            db = d(e.base)
            if _is(db, 0.0):
                r = ZERO
            else:
                r = mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), db)
        elif isinstance(e, Call):
            da = d(e.arg)
            if _is(da, 0.0):
                r = ZERO
            elif e.name == "sin":
                r = mul(call("cos", e.arg), da)
            elif e.name == "cos":
                r = neg(mul(call("sin", e.arg), da))
            elif e.name == "atan":
                r = div(da, add(ONE, power(e.arg, 2)))
            elif e.name == "exp":
                r = mul(e, da)
            else:  # pragma: no cover - guarded by the grammar
                raise ValueError(e.name)
        else:
            raise TypeError(f"not an expression node: {e!r}")
        memo[key] = r
        return r

    return d(e)


# ---------------------------------------------------------------------------
# evaluation

class EvaluationError(ArithmeticError):
    """Division by zero or a non-finite value somewhere in the tree."""

    def __init__(self, message: str, node: Expr | None = None, point=None):
        if node is not None:
            message += f" in '{to_text(node)}'"
        if point is not None:
            message += f" at x'={[float(v) for v in np.atleast_1d(point)]}"
        super().__init__(message)
        self.node = node
        self.point = point


def _as_points(points) -> tuple[np.ndarray, bool]:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
        return pts, True
    if pts.ndim == 1:
        return pts.reshape(1, -1), True
    return pts, False


def evaluate(e: Expr, points) -> np.ndarray:
    """Vectorised evaluation.  ``points`` has shape (P, n_vars); returns (P,)."""
    pts, _ = _as_points(points)
    n_points = pts.shape[0]
    memo: dict[int, np.ndarray] = {}

    def fail(msg: str, node: Expr, bad: np.ndarray):
        idx = int(np.flatnonzero(bad)[0])
        raise EvaluationError(msg, node, pts[idx] if pts.shape[1] else None)

    def go(e: Expr) -> np.ndarray:
        key = id(e)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(e, Const):
            r = np.full(n_points, e.value)
        elif isinstance(e, Var):
            if e.index > pts.shape[1]:
                raise EvaluationError(f"variable x{e.index} not provided (point has {pts.shape[1]} coordinates)")
            r = pts[:, e.index - 1]
        elif isinstance(e, Neg):
            r = -go(e.arg)
        elif isinstance(e, Add):
            r = go(e.left) + go(e.right)
        elif isinstance(e, Sub):
            r = go(e.left) - go(e.right)
        elif isinstance(e, Mul):
            r = go(e.left) * go(e.right)
        elif isinstance(e, Div):
            den = go(e.right)
            zero = den == 0.0
            if zero.any():
                fail("division by zero", e, zero)
            r = go(e.left) / den
        elif isinstance(e, Pow):
            base = go(e.base)
            if e.exponent < 0:
                zero = base == 0.0
                if zero.any():
                    fail("division by zero (negative power of zero)", e, zero)
                r = 1.0 / base ** (-e.exponent)
            else:
                r = base ** e.exponent
        elif isinstance(e, Call):
            with np.errstate(over="ignore"):
                r = FUNCTIONS[e.name](go(e.arg))
        else:
            raise TypeError(f"not an expression node: {e!r}")
        if not isinstance(e, (Const, Var)):
            bad = ~np.isfinite(r)
            if bad.any():
                fail("non-finite value", e, bad)
        memo[key] = r
        return r

    with np.errstate(over="ignore", invalid="ignore"):
        out = go(e)
    return np.array(out, dtype=float, copy=True)


def eval_expr(e: Expr, point: Sequence[float]) -> float:
    """Evaluate at a single point x' (length n_vars)."""
    return float(evaluate(e, np.asarray(point, dtype=float).reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# grid sampling

@dataclass(frozen=True)
class ExprGridProfile:
    axes: tuple[np.ndarray, ...]
    values: np.ndarray  # shape = tuple(len(a) for a in axes)
    minimum: float
    maximum: float
    argmin: tuple[float, ...]
    argmax: tuple[float, ...]

    @property
    def points(self) -> np.ndarray:
        return grid_points(self.axes)

    def to_dict(self) -> dict:
        return {
            "box": [[float(a[0]), float(a[-1])] for a in self.axes],
            "resolution": [len(a) for a in self.axes],
            "min": self.minimum,
            "max": self.maximum,
            "argmin": list(self.argmin),
            "argmax": list(self.argmax),
        }


def grid_axes(box: Sequence[Sequence[float]], resolution) -> tuple[np.ndarray, ...]:
    if isinstance(resolution, (int, np.integer)):
        resolution = [int(resolution)] * len(box)
    if len(resolution) != len(box):
        raise ValueError("resolution must give one count per axis")
    axes = []
    for (lo, hi), n in zip(box, resolution):
        if n < 2:
            raise ValueError("resolution must be at least 2 per axis")
        axes.append(np.linspace(float(lo), float(hi), int(n)))
    return tuple(axes)


def grid_points(axes: Sequence[np.ndarray]) -> np.ndarray:
    """Row-major (first axis slowest) list of grid points, shape (P, len(axes))."""
    if not axes:
        return np.zeros((1, 0))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def sample_expr(e: Expr, box: Sequence[Sequence[float]], resolution) -> ExprGridProfile:
    """Evaluate ``e`` on a regular grid over ``box`` and record its extremes."""
    axes = grid_axes(box, resolution)
    pts = grid_points(axes)
    vals = evaluate(e, pts)
    shape = tuple(len(a) for a in axes)
    i_min, i_max = int(np.argmin(vals)), int(np.argmax(vals))
    return ExprGridProfile(
        axes=axes,
        values=vals.reshape(shape),
        minimum=float(vals[i_min]),
        maximum=float(vals[i_max]),
        argmin=tuple(float(v) for v in pts[i_min]),
        argmax=tuple(float(v) for v in pts[i_max]),
    )


def numerically_equal(a: Expr, b: Expr, points: np.ndarray, tol: float = 1e-10) -> bool:
    """Expression equality as the grammar allows it: agreement on sample points."""
    va, vb = evaluate(a, points), evaluate(b, points)
    scale = max(1.0, float(np.max(np.abs(va))), float(np.max(np.abs(vb))))
    return bool(np.max(np.abs(va - vb)) <= tol * scale)


def normalize(e: Expr) -> Expr:
    """The form the parser produces: negated constants folded into the constant."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Neg):
        inner = normalize(e.arg)
        return Const(-inner.value) if isinstance(inner, Const) else Neg(inner)
    if isinstance(e, Pow):
        return Pow(normalize(e.base), e.exponent)
    if isinstance(e, Call):
        return Call(e.name, normalize(e.arg))
    return type(e)(normalize(e.left), normalize(e.right))
