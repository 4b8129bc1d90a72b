"""Collect-like-terms normal form, used to print payload coefficients readably.

An expression is rewritten as a sum of monomials ``k * prod(atom^p)``.  Atoms
are variables, function calls with normalised arguments, and multi-term sums
that appear under a power or in a denominator.  Nothing is factored and
nothing beyond this bookkeeping is attempted; ``tidy`` only accepts the
rewritten form after checking it numerically against the original.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from . import expr as ex
from .expr import Expr

# monomial: tuple of (atom_key, power) sorted by key
Monomial = tuple
Poly = dict  # Monomial -> float

_MAX_TERMS = 400


class _TooLarge(Exception):
    pass


class _Collector:
    def __init__(self):
        self.atoms: dict[str, Expr] = {}

    def atom(self, e: Expr) -> Poly:
        key = ex.to_text(e)
        self.atoms.setdefault(key, e)
        return {((key, 1),): 1.0}

    def poly(self, e: Expr) -> Poly:
        if isinstance(e, ex.Const):
            return {(): e.value} if e.value != 0.0 else {}
        if isinstance(e, ex.Var):
            return self.atom(e)
        if isinstance(e, ex.Neg):
            return _scale(self.poly(e.arg), -1.0)
        if isinstance(e, ex.Add):
            return _plus(self.poly(e.left), self.poly(e.right))
        if isinstance(e, ex.Sub):
            return _plus(self.poly(e.left), _scale(self.poly(e.right), -1.0))
        if isinstance(e, ex.Mul):
            return _times(self.poly(e.left), self.poly(e.right))
        if isinstance(e, ex.Div):
            return _times(self.poly(e.left), self.inverse(self.poly(e.right)))
        if isinstance(e, ex.Pow):
            base = self.poly(e.base)
            if len(base) == 1:
                (mono, k), = base.items()
                if k == 0.0 and e.exponent < 0:
                    raise ZeroDivisionError
                return {tuple((a, p * e.exponent) for a, p in mono): k ** e.exponent}
            if not base:
                return {} if e.exponent > 0 else {(): 1.0}
            return _mono_power(self.atom(self.rebuild(base)), e.exponent)
        if isinstance(e, ex.Call):
            arg = self.poly(e.arg)
            if not arg or set(arg) == {()}:
                value = arg.get((), 0.0)
                return {(): float(ex.FUNCTIONS[e.name](value))}
            return self.atom(ex.Call(e.name, self.rebuild(arg)))
        raise TypeError(e)

    def inverse(self, p: Poly) -> Poly:
        if not p:
            raise ZeroDivisionError
        if len(p) == 1:
            (mono, k), = p.items()
            return {tuple((a, -q) for a, q in mono): 1.0 / k}
        return _mono_power(self.atom(self.rebuild(p)), -1)

    def rebuild(self, p: Poly) -> Expr:
        if not p:
            return ex.ZERO
        terms = sorted(p.items(), key=lambda kv: _order(kv[0]))
        out: Optional[Expr] = None
        for mono, k in terms:
            mag = abs(k)
            num: Optional[Expr] = None if mag == 1.0 else ex.Const(mag)
            den: Optional[Expr] = None
            for key, q in mono:
                factor = ex.power(self.atoms[key], abs(q))
                if q > 0:
                    num = factor if num is None else ex.Mul(num, factor)
                else:
                    den = factor if den is None else ex.Mul(den, factor)
            body = num if num is not None else ex.Const(mag)
            if den is not None:
                body = ex.Div(body, den)
            if out is None:
                out = ex.neg(body) if k < 0 else body
            else:
                out = ex.Sub(out, body) if k < 0 else ex.Add(out, body)
        return out


def _order(mono: Monomial):
    return (sum(abs(q) for _, q in mono), mono)


def _plus(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for m, k in b.items():
        out[m] = out.get(m, 0.0) + k
    scale = max((abs(v) for v in a.values()), default=0.0)
    scale = max(scale, max((abs(v) for v in b.values()), default=0.0))
    return {m: k for m, k in out.items() if abs(k) > 1e-13 * scale}


def _scale(a: Poly, k: float) -> Poly:
    return {m: v * k for m, v in a.items()}


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    powers: dict[str, int] = dict(m1)
    for key, q in m2:
        powers[key] = powers.get(key, 0) + q
    return tuple(sorted((key, q) for key, q in powers.items() if q != 0))


def _times(a: Poly, b: Poly) -> Poly:
    if len(a) * len(b) > _MAX_TERMS:
        raise _TooLarge
    out: Poly = {}
    for m1, k1 in a.items():
        for m2, k2 in b.items():
            m = _mono_mul(m1, m2)
            out[m] = out.get(m, 0.0) + k1 * k2
    scale = max((abs(v) for v in out.values()), default=0.0)
    return {m: k for m, k in out.items() if abs(k) > 1e-13 * scale}


def _mono_power(p: Poly, n: int) -> Poly:
    (mono, k), = p.items()
    return {tuple((a, q * n) for a, q in mono): k ** n}


def collect(e: Expr) -> Expr:
    """Collected form of ``e``; falls back to ``e`` itself when it grows too large."""
    c = _Collector()
    try:
        return c.rebuild(c.poly(e))
    except (_TooLarge, ZeroDivisionError, RecursionError):
        return e


def proportional(a: Expr, b: Expr) -> Optional[float]:
    """Return k with b == k*a as collected polynomials, else None."""
    c = _Collector()
    try:
        pa, pb = c.poly(a), c.poly(b)
    except (_TooLarge, ZeroDivisionError, RecursionError):
        return None
    if not pa or set(pa) != set(pb):
        return None
    ratios = [pb[m] / pa[m] for m in pa]
    k = ratios[0]
    if all(abs(r - k) <= 1e-12 * max(1.0, abs(k)) for r in ratios):
        return k
    return None


def tidy(e: Expr, points: np.ndarray, tol: float = 1e-12) -> Expr:
    """Collected form when it agrees with ``e`` on ``points``; ``e`` otherwise."""
    c = collect(e)
    if c is e:
        return e
    try:
        if ex.numerically_equal(e, c, points, tol):
            return c
    except ex.EvaluationError:
        pass
    return e
