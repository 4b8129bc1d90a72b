"""Elimination for finite-mode sources with c_1 = d_1 = 0.

Once the traces vanish, a solution has the form

    u = a0/2 + a1 cos x_N + b1 sin x_N + sum_j a_{m_j} cos(m_j x_N) + sum_j b_{n_j} sin(n_j x_N)

with a1, b1 constants and

    L a0 = -a0 + c0,   L a_m = (m^2 - 1) a_m + c_m,   L b_n = (n^2 - 1) b_n + d_n.

Cosine chain.  u(., 0) = 0 gives a0 = -2 a1 - 2 sum a_{m_j}.  Applying L to
it and substituting the equations gives sum m_j^2 a_{m_j} = -a1 - f with
f = c0/2 + sum c_{m_j}.  Each further application of L raises the powers:

    sum_j (m_j^2)^r a_{m_j} = rhs_r,
    rhs_{r+1} = rhs_r + L rhs_r - sum_j (m_j^2)^r c_{m_j},

so r = 1..k1 yields a Vandermonde system in the m_j^2, inverted here with
exact rationals.  Sine chain.  u_N(., 0) = 0 gives b1 + sum n_j b_{n_j} = 0
and the same recursion with odd powers n_j^{2r+1}.

Every quantity is an :class:`Affine` value ``base + coef * parameter`` where
``coef`` is an exact rational: the parameters a1, b1 are constants, so L
never touches them.  The parameters are finally fixed by least squares on
the unused mode equations, sampled on the verification grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import expr as ex
from .canonical import collect, tidy
from .coefficients import apply_div_form
from .expr import Expr
from .model import DiffusionMatrix, ProblemSpec, TrigSeries


@dataclass(frozen=True)
class Affine:
    base: Expr
    coef: Fraction = Fraction(0)

    def __add__(self, other: "Affine") -> "Affine":
        return Affine(ex.add(self.base, other.base), self.coef + other.coef)

    def __sub__(self, other: "Affine") -> "Affine":
        return Affine(ex.sub(self.base, other.base), self.coef - other.coef)

    def scale(self, k: Fraction) -> "Affine":
        k = Fraction(k)
        if k == 0:
            return Affine(ex.ZERO, Fraction(0))
        return Affine(ex.mul(ex.const(float(k)), self.base), self.coef * k)

    def apply(self, A: DiffusionMatrix) -> "Affine":
        """L of the value; the constant parameter drops out."""
        return Affine(apply_div_form(A, self.base), Fraction(0))

    def at(self, value: float) -> Expr:
        if self.coef == 0 or value == 0.0:
            return self.base
        return ex.add(self.base, ex.const(float(self.coef) * value))

    def describe(self, name: str) -> str:
        base = _short(collect(self.base))
        if self.coef == 0:
            return base
        sign = "-" if self.coef < 0 else "+"
        return f"{base} {sign} {abs(self.coef)}*{name}"


def _short(e: Expr, limit: int = 400) -> str:
    text = ex.to_text(e)
    return text if len(text) <= limit else text[:limit] + "..."


def _const(e: Expr) -> Affine:
    return Affine(e, Fraction(0))


def _solve_exact(V: list, rhs: list) -> list:
    """Solve V x = rhs where V has Fraction entries and rhs holds Affine values."""
    n = len(V)
    M = [row[:] for row in V]
    # inverse by Gauss-Jordan on [M | I]
    inv = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv[col], inv[piv] = inv[piv], inv[col]
        p = M[col][col]
        M[col] = [v / p for v in M[col]]
        inv[col] = [v / p for v in inv[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                k = M[r][col]
                M[r] = [a - k * b for a, b in zip(M[r], M[col])]
                inv[r] = [a - k * b for a, b in zip(inv[r], inv[col])]
    out = []
    for i in range(n):
        acc = Affine(ex.ZERO, Fraction(0))
        for r in range(n):
            if inv[i][r] != 0:
                acc = acc + rhs[r].scale(inv[i][r])
        out.append(acc)
    return out


@dataclass
class EliminationState:
    I1: tuple
    I2: tuple
    c: dict                      # m -> Expr (0 and I1)
    d: dict                      # n -> Expr (I2)
    substitutions: list = field(default_factory=list)   # (name, Affine), in derivation order
    aggregates: list = field(default_factory=list)      # (name, Expr): f, f1, ...
    rounds_cos: int = 0
    rounds_sin: int = 0

    @property
    def k1(self) -> int:
        return len(self.I1)

    @property
    def k2(self) -> int:
        return len(self.I2)

    def value(self, name: str) -> Affine:
        for n, v in self.substitutions:
            if n == name:
                return v
        raise KeyError(name)


def initial_state(g: TrigSeries) -> EliminationState:
    if g.affine is not None:
        raise ValueError("elimination handles finite trigonometric sources only")
    if 1 in g.cos or 1 in g.sin:
        raise ValueError("elimination requires c1 = d1 = 0")
    I1 = tuple(sorted(m for m in g.cos if m >= 2))
    I2 = tuple(sorted(n for n in g.sin if n >= 2))
    c = {m: g.a(m) for m in (0,) + I1}
    d = {n: g.b(n) for n in I2}
    return EliminationState(I1, I2, c, d)


def eliminate_cos_chain(state: EliminationState, A: DiffusionMatrix) -> EliminationState:
    """Express a_{m_j} and a0 through the source and the parameter a1."""
    ms = state.I1
    k = len(ms)
    f = ex.mul(ex.const(0.5), state.c[0])
    for m in ms:
        f = ex.add(f, state.c[m])
    rhs = [Affine(ex.neg(f), Fraction(-1))]     # rhs_1 = -a1 - f
    state.aggregates.append(("f", f))
    for r in range(1, k):
        cur = rhs[-1]
        forcing = ex.ZERO
        for m in ms:
            forcing = ex.add(forcing, ex.mul(ex.const(float(m * m) ** r), state.c[m]))
        nxt = cur + cur.apply(A) - _const(forcing)
        state.aggregates.append((f"f{r}", ex.neg(nxt.base)))
        rhs.append(nxt)
    V = [[Fraction(m * m) ** r for m in ms] for r in range(1, k + 1)]
    coeffs = _solve_exact(V, rhs) if k else []
    state.rounds_cos = 1 + k   # boundary identity for a0, then one relation per mode
    # highest mode first, matching the order in which the chain isolates them
    for m, val in sorted(zip(ms, coeffs), reverse=True):
        state.substitutions.append((f"a{m}", val))
    a0 = Affine(ex.ZERO, Fraction(-2))
    for val in coeffs:
        a0 = a0 - val.scale(2)
    state.substitutions.append(("a0", a0))
    return state


def eliminate_sin_chain(state: EliminationState, A: DiffusionMatrix) -> EliminationState:
    """Express b_{n_j} through the source and the parameter b1."""
    ns = state.I2
    k = len(ns)
    rhs = [Affine(ex.ZERO, Fraction(-1))]       # s_0 = -b1
    for r in range(0, k - 1):
        cur = rhs[-1]
        forcing = ex.ZERO
        for n in ns:
            forcing = ex.add(forcing, ex.mul(ex.const(float(n) ** (2 * r + 1)), state.d[n]))
        rhs.append(cur + cur.apply(A) - _const(forcing))
    V = [[Fraction(n) ** (2 * r + 1) for n in ns] for r in range(k)]
    coeffs = _solve_exact(V, rhs) if k else []
    state.rounds_sin = k
    for n, val in sorted(zip(ns, coeffs), reverse=True):
        state.substitutions.append((f"b{n}", val))
    return state


# ---------------------------------------------------------------------------
# parameter determination

@dataclass
class ParameterResult:
    a1: Optional[float]
    b1: Optional[float]
    consistent: Optional[bool]          # None: neither consistent nor a clear certificate
    max_residual: float
    witness: Optional[dict] = None
    free: list = field(default_factory=list)
    candidate: Optional[TrigSeries] = None
    residual_exprs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"a1": self.a1, "b1": self.b1, "consistent": self.consistent,
             "max_residual": self.max_residual, "free_parameters": list(self.free)}
        if self.witness is not None:
            d["witness"] = self.witness
        return d


def _mode_residuals(state: EliminationState, A: DiffusionMatrix):
    """Unused mode equations as Affine residuals, tagged by parameter."""
    out = []
    a0 = state.value("a0")
    out.append(("a1", "cos 0", a0.apply(A) + a0 - _const(state.c[0])))
    for m in state.I1:
        am = state.value(f"a{m}")
        out.append(("a1", f"cos {m}", am.apply(A) - am.scale(m * m - 1) - _const(state.c[m])))
    for n in state.I2:
        bn = state.value(f"b{n}")
        out.append(("b1", f"sin {n}", bn.apply(A) - bn.scale(n * n - 1) - _const(state.d[n])))
    return out


def _snap(v: float, scale: float = 1.0) -> float:
    if abs(v) <= 1e-13 * max(1.0, scale):
        return 0.0
    fr = Fraction(v).limit_denominator(10 ** 6)
    return float(fr) if abs(float(fr) - v) <= 1e-12 * max(1.0, abs(v)) else v


def sample_points(p: ProblemSpec, count: int = 10, seed: int = 2024) -> np.ndarray:
    """Grid points of the verification box plus a few generic (random) ones."""
    res = min(p.grid, 65) if p.n_vars == 1 else min(p.grid, 17)
    grid = p.xprime_points(res)
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in p.box])
    hi = np.array([b[1] for b in p.box])
    extra = lo + (hi - lo) * rng.random((count, p.n_vars))
    return np.vstack([grid, extra])


def determine_parameters(state: EliminationState, p: ProblemSpec) -> ParameterResult:
    A = p.diffusion
    tol = p.tolerances.residual
    pts = sample_points(p)
    rows = []
    for param, label, res in _mode_residuals(state, A):
        base = ex.evaluate(res.base, pts)
        rows.append((param, label, res, base))
    values = {}
    free = []
    for param in ("a1", "b1"):
        sel = [(float(r.coef), base) for q, _, r, base in rows if q == param]
        num = sum(c * base.sum() for c, base in sel)
        den = sum(c * c * base.size for c, base in sel)
        if den == 0.0:
            if param == "b1" and not state.I2:
                values[param] = 0.0          # u_N(., 0) = 0 with no sine modes
            else:
                free.append(param)
                values[param] = 0.0
        else:
            values[param] = _snap(float(-num / den))
    worst, witness = 0.0, None
    residual_exprs = {}
    for param, label, res, base in rows:
        r = base + float(res.coef) * values[param]
        residual_exprs[label] = res.at(values[param])
        k = int(np.argmax(np.abs(r)))
        if abs(r[k]) > worst:
            worst = float(abs(r[k]))
            witness = {"equation": label, "point": [float(v) for v in pts[k]], "value": float(r[k]),
                       "residual": _short(collect(residual_exprs[label]))}
    if worst <= tol:
        consistent: Optional[bool] = True
    elif worst > 10.0 * tol:
        consistent = False
    else:
        consistent = None
    out = ParameterResult(values["a1"], values["b1"], consistent, worst, witness, free,
                          residual_exprs=residual_exprs)
    if consistent:
        out.candidate = assemble(state, values["a1"], values["b1"], p)
    return out


def assemble(state: EliminationState, a1: float, b1: float, p: ProblemSpec) -> TrigSeries:
    tidy_pts = sample_points(p, count=6, seed=7)

    def clean(e: Expr) -> Expr:
        if ex.is_constant_node(e):
            return ex.const(_snap(ex.eval_expr(e, tidy_pts[0])))
        return tidy(e, tidy_pts)

    cos = {0: clean(state.value("a0").at(a1)), 1: ex.const(a1)}
    for m in state.I1:
        cos[m] = clean(state.value(f"a{m}").at(a1))
    sin = {1: ex.const(b1)}
    for n in state.I2:
        sin[n] = clean(state.value(f"b{n}").at(b1))
    return TrigSeries(p.n_vars, cos, sin)


@dataclass
class EliminationOutcome:
    state: EliminationState
    parameters: ParameterResult
    flags: list = field(default_factory=list)

    @property
    def rounds(self) -> int:
        """Symbolic rounds of the cosine chain, including parameter determination."""
        return self.state.rounds_cos + 1

    def to_dict(self) -> dict:
        return {
            "I1": list(self.state.I1), "I2": list(self.state.I2),
            "rounds_cos": self.rounds, "rounds_sin": self.state.rounds_sin + 1,
            "substitutions": [{"name": n, "value": v.describe("a1" if n.startswith("a") else "b1")}
                              for n, v in self.state.substitutions],
            "parameters": self.parameters.to_dict(),
            "flags": list(self.flags),
        }


def eliminate(p: ProblemSpec) -> EliminationOutcome:
    """Run both chains and fix the parameters."""
    flags = []
    if p.n_vars == 2 and not p.diffusion.is_constant():
        flags.append("variable diffusion in two variables: ellipticity is grid evidence only")
    if p.n_vars > 2:
        flags.append(f"dimension {p.dimension}: traces taken from the caller's assertion")
    state = initial_state(p.source)
    eliminate_cos_chain(state, p.diffusion)
    eliminate_sin_chain(state, p.diffusion)
    params = determine_parameters(state, p)
    return EliminationOutcome(state, params, flags)
