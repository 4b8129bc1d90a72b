"""Problem data: diffusion block, finite Fourier series in x_N, problem specs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import expr as ex
from .canonical import collect, proportional
from .expr import Expr

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# diffusion matrix

@dataclass(frozen=True)
class DiffusionMatrix:
    """Symmetric (N-1)x(N-1) block of A; the x_N row/column is implied (0, ..., 0, 1).

    Only the upper triangle is stored, so symmetry holds by construction.
    """

    n_minus_1: int
    upper: tuple  # ((a11, a12, ...), (a22, ...), ...) row-wise upper triangle

    @classmethod
    def identity(cls, n_minus_1: int) -> "DiffusionMatrix":
        rows = tuple(
            tuple(ex.ONE if i == j else ex.ZERO for j in range(i, n_minus_1))
            for i in range(n_minus_1)
        )
        return cls(n_minus_1, rows)

    @classmethod
    def scalar(cls, entry: Expr) -> "DiffusionMatrix":
        return cls(1, ((entry,),))

    @classmethod
    def from_full(cls, entries: Sequence[Sequence[Expr]], points: Optional[np.ndarray] = None):
        """Build from a full square array; the lower triangle must mirror the upper one."""
        n = len(entries)
        if any(len(row) != n for row in entries):
            raise ValueError("diffusion matrix must be square")
        for i in range(n):
            for j in range(i + 1, n):
                a, b = entries[i][j], entries[j][i]
                if a == b:
                    continue
                if points is None or not ex.numerically_equal(a, b, points, 1e-12):
                    raise ValueError(f"diffusion matrix is not symmetric at ({i + 1},{j + 1})")
        return cls(n, tuple(tuple(entries[i][j] for j in range(i, n)) for i in range(n)))

    def entry(self, i: int, j: int) -> Expr:
        """0-based (i, j) entry."""
        if i > j:
            i, j = j, i
        return self.upper[i][j - i]

    def is_identity(self) -> bool:
        return all(
            isinstance(self.entry(i, j), ex.Const) and self.entry(i, j).value == (1.0 if i == j else 0.0)
            for i in range(self.n_minus_1) for j in range(self.n_minus_1)
        )

    def is_constant(self) -> bool:
        return all(ex.is_constant_node(self.entry(i, j))
                   for i in range(self.n_minus_1) for j in range(i, self.n_minus_1))

    def values(self, points: np.ndarray) -> np.ndarray:
        """Sampled matrices, shape (P, n, n)."""
        pts = np.asarray(points, dtype=float)
        n = self.n_minus_1
        out = np.empty((pts.shape[0], n, n))
        for i in range(n):
            for j in range(i, n):
                v = ex.evaluate(self.entry(i, j), pts)
                out[:, i, j] = v
                out[:, j, i] = v
        return out


# ---------------------------------------------------------------------------
# finite Fourier series in x_N

def _clean(coeffs: Mapping[int, Expr]) -> dict[int, Expr]:
    return {int(m): c for m, c in sorted(coeffs.items())
            if not (isinstance(c, ex.Const) and c.value == 0.0)}


@dataclass(frozen=True)
class TrigSeries:
    """u(x', x_N) = a0/2 + sum_m a_m cos(m x_N) + b_m sin(m x_N) [+ kappa(x') x_N].

    ``cos[0]`` stores a0 itself; the halving happens at synthesis.  The affine
    term exists only to carry sources and solutions that grow like x_N.
    """

    n_vars: int
    cos: Mapping[int, Expr] = field(default_factory=dict)
    sin: Mapping[int, Expr] = field(default_factory=dict)
    affine: Optional[Expr] = None

    def __post_init__(self):
        cos = _clean(self.cos)
        sin = _clean(self.sin)
        if any(m < 0 for m in cos) or any(m < 1 for m in sin):
            raise ValueError("cos modes start at 0, sin modes at 1")
        affine = self.affine
        if isinstance(affine, ex.Const) and affine.value == 0.0:
            affine = None
        object.__setattr__(self, "cos", cos)
        object.__setattr__(self, "sin", sin)
        object.__setattr__(self, "affine", affine)

    @classmethod
    def from_constants(cls, n_vars: int, cos: Mapping[int, float] = (), sin: Mapping[int, float] = (),
                       affine: Optional[float] = None) -> "TrigSeries":
        cos = dict(cos)
        sin = dict(sin)
        return cls(
            n_vars,
            {m: ex.const(v) for m, v in cos.items()},
            {m: ex.const(v) for m, v in sin.items()},
            None if affine is None else ex.const(affine),
        )

    @property
    def max_mode(self) -> int:
        return max([0, *self.cos, *self.sin])

    def a(self, m: int) -> Expr:
        return self.cos.get(m, ex.ZERO)

    def b(self, m: int) -> Expr:
        return self.sin.get(m, ex.ZERO)

    def is_zero(self) -> bool:
        return not self.cos and not self.sin and self.affine is None

    def modes(self) -> list[tuple[str, int, Expr]]:
        out = [("cos", m, c) for m, c in self.cos.items()]
        out += [("sin", m, c) for m, c in self.sin.items()]
        return out

    def map(self, fn) -> "TrigSeries":
        return TrigSeries(
            self.n_vars,
            {m: fn(c) for m, c in self.cos.items()},
            {m: fn(c) for m, c in self.sin.items()},
            None if self.affine is None else fn(self.affine),
        )

    def scale(self, k: float) -> "TrigSeries":
        return self.map(lambda c: ex.mul(ex.const(k), c))

    def __add__(self, other: "TrigSeries") -> "TrigSeries":
        if self.n_vars != other.n_vars:
            raise ValueError("series over different variable counts")
        cos = dict(self.cos)
        for m, c in other.cos.items():
            cos[m] = ex.add(cos.get(m, ex.ZERO), c)
        sin = dict(self.sin)
        for m, c in other.sin.items():
            sin[m] = ex.add(sin.get(m, ex.ZERO), c)
        if self.affine is None:
            aff = other.affine
        elif other.affine is None:
            aff = self.affine
        else:
            aff = ex.add(self.affine, other.affine)
        return TrigSeries(self.n_vars, cos, sin, aff)

    def __neg__(self) -> "TrigSeries":
        return self.map(ex.neg)

    def __sub__(self, other: "TrigSeries") -> "TrigSeries":
        return self + (-other)

    def xprime_constant(self) -> bool:
        """True when no coefficient depends on x'."""
        return all(ex.is_constant_node(c) for _, _, c in self.modes()) and (
            self.affine is None or ex.is_constant_node(self.affine))

    def coefficient_matrix(self, points: np.ndarray, modes: Sequence[tuple[str, int]]) -> np.ndarray:
        """Coefficient values at x' points for the given (kind, m) list, shape (P, len(modes))."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.n_vars)
        out = np.zeros((pts.shape[0], len(modes)))
        for k, (kind, m) in enumerate(modes):
            if kind == "cos":
                c = self.cos.get(m)
                scale = 0.5 if m == 0 else 1.0
            elif kind == "sin":
                c = self.sin.get(m)
                scale = 1.0
            else:  # affine
                c = self.affine
                scale = 1.0
            if c is not None:
                out[:, k] = scale * ex.evaluate(c, pts)
        return out

    def basis_modes(self) -> list[tuple[str, int]]:
        modes = [("cos", m) for m in self.cos] + [("sin", m) for m in self.sin]
        if self.affine is not None:
            modes.append(("affine", 1))
        return modes

    def to_text(self) -> str:
        return series_text(self)


def trig_basis(modes: Sequence[tuple[str, int]], xn: np.ndarray) -> np.ndarray:
    """Basis values, shape (len(modes), Q)."""
    xn = np.asarray(xn, dtype=float)
    out = np.empty((len(modes), xn.size))
    for k, (kind, m) in enumerate(modes):
        if kind == "cos":
            out[k] = np.cos(m * xn)
        elif kind == "sin":
            out[k] = np.sin(m * xn)
        else:
            out[k] = xn
    return out


def synth_grid(s: TrigSeries, points: np.ndarray, xn: np.ndarray) -> np.ndarray:
    """u on the tensor grid (x' points) x (x_N values), shape (P, Q)."""
    modes = s.basis_modes()
    pts = np.asarray(points, dtype=float)
    if not modes:
        return np.zeros((pts.shape[0], np.asarray(xn).size))
    return s.coefficient_matrix(pts, modes) @ trig_basis(modes, xn)


def synth_series(s: TrigSeries, point) -> float:
    """u at one point (x', x_N); ``point`` is (x'_1, ..., x'_n, x_N)."""
    p = np.asarray(point, dtype=float).ravel()
    if p.size != s.n_vars + 1:
        raise ValueError(f"expected {s.n_vars + 1} coordinates, got {p.size}")
    return float(synth_grid(s, p[:-1].reshape(1, -1), p[-1:])[0, 0])


def series_derivative_xn(s: TrigSeries, order: int = 1) -> TrigSeries:
    """Exact mode-wise d/dx_N: (a_m, b_m) -> (m b_m, -m a_m); affine kappa*x_N -> kappa."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    out = s
    for _ in range(order):
        cos = {m: ex.mul(ex.const(m), b) for m, b in out.sin.items()}
        sin = {m: ex.mul(ex.const(-m), a) for m, a in out.cos.items() if m > 0}
        if out.affine is not None:
            # constant kappa(x') enters the x_N-independent mode, stored as a0 = 2*kappa
            cos[0] = ex.add(cos.get(0, ex.ZERO), ex.mul(ex.const(2.0), out.affine))
        out = TrigSeries(s.n_vars, cos, sin, None)
    return out


# ---------------------------------------------------------------------------
# printing

def _trig_text(kind: str, m: int) -> str:
    if kind == "affine":
        return "xN"
    arg = "xN" if m == 1 else f"{m}*xN"
    return f"{kind}({arg})"


def _coef_terms(s: TrigSeries) -> list[tuple[Expr, str]]:
    terms = []
    if 0 in s.cos:
        terms.append((collect(ex.div(s.cos[0], ex.const(2.0))), ""))
    if s.affine is not None:
        terms.append((collect(s.affine), "xN"))
    for m, c in s.cos.items():
        if m > 0:
            terms.append((collect(c), _trig_text("cos", m)))
    for m, c in s.sin.items():
        terms.append((collect(c), _trig_text("sin", m)))
    return terms


def _join(parts: list[tuple[Expr, str]]) -> str:
    out = ""
    for coef, basis in parts:
        text = ex.to_text(coef)
        negative = text.startswith("-")
        body = text[1:] if negative else text
        if basis:
            if body == "1":
                body = basis
            else:
                needs_paren = isinstance(coef, (ex.Add, ex.Sub)) or (
                    negative and isinstance(coef, ex.Neg) and isinstance(coef.arg, (ex.Add, ex.Sub)))
                body = f"({body})*{basis}" if needs_paren else f"{body}*{basis}"
        if not out:
            out = ("-" + body) if negative else body
        else:
            out += (" - " if negative else " + ") + body
    return out or "0"


def series_text(s: TrigSeries) -> str:
    """Readable form with xN as the normal variable, e.g. ``1 - cos(xN)``."""
    terms = _coef_terms(s)
    if not terms:
        return "0"
    lead = terms[0][0]
    if len(terms) > 1 and not ex.is_constant_node(lead):
        ratios = [proportional(lead, c) for c, _ in terms]
        if all(r is not None for r in ratios):
            inner = _join([(ex.const(r), b) for r, (_, b) in zip(ratios, terms)])
            lead_text = ex.to_text(lead)
            if isinstance(lead, (ex.Add, ex.Sub, ex.Neg)) or lead_text.startswith("-"):
                lead_text = f"({lead_text})"
            return f"{lead_text}*({inner})"
    return _join(terms)


# ---------------------------------------------------------------------------
# problem spec

@dataclass(frozen=True)
class Tolerances:
    zero: float = 1e-9
    residual: float = 1e-8
    pd: float = 1e-12

    def __post_init__(self):
        for name in ("zero", "residual", "pd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")


@dataclass(frozen=True)
class ProblemSpec:
    """-div(A(x') grad u) = u - g on the half-space, u = 0 on x_N = 0."""

    dimension: int
    diffusion: DiffusionMatrix
    source: TrigSeries
    tolerances: Tolerances = field(default_factory=Tolerances)
    box: tuple = ()
    grid: int = 257
    periods: int = 2
    oracle_R: float = 4.0
    oracle_h: float = TWO_PI / 128
    passo_base: bool = False  # caller asserts u(.,2pi) = 0 and u_N(.,0) = 0

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("dimension must be at least 2")
        if self.diffusion.n_minus_1 != self.dimension - 1:
            raise ValueError("diffusion block must be (N-1)x(N-1)")
        if self.source.n_vars != self.dimension - 1:
            raise ValueError("source coefficients must be functions of N-1 variables")
        box = tuple(tuple(float(v) for v in ax) for ax in self.box) or tuple(
            (-4.0, 4.0) for _ in range(self.dimension - 1))
        if len(box) != self.dimension - 1 or any(lo >= hi for lo, hi in box):
            raise ValueError("verification box needs one increasing interval per x' axis")
        object.__setattr__(self, "box", box)
        if self.grid < 2 or self.periods < 1:
            raise ValueError("grid must be >= 2 and periods >= 1")
        if not (self.oracle_R > 0 and self.oracle_h > 0):
            raise ValueError("oracle R and h must be positive")

    @property
    def n_vars(self) -> int:
        return self.dimension - 1

    def with_source(self, source: TrigSeries) -> "ProblemSpec":
        return replace(self, source=source)

    def xprime_axes(self, resolution: Optional[int] = None):
        return ex.grid_axes(self.box, resolution or self.grid)

    def xprime_points(self, resolution: Optional[int] = None) -> np.ndarray:
        return ex.grid_points(self.xprime_axes(resolution))

    def xn_grid(self, resolution: Optional[int] = None, periods: Optional[int] = None) -> np.ndarray:
        k = periods or self.periods
        return np.linspace(0.0, TWO_PI * k, resolution or self.grid)


@dataclass(frozen=True)
class FamilySolution:
    """u_A = base + A * direction for A in [lo, hi]."""

    base: TrigSeries
    direction: TrigSeries
    parameter_range: tuple[float, float]
    completeness: str = "known family, completeness unknown"

    def member(self, A: float) -> TrigSeries:
        return self.base + self.direction.scale(A)


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Finding:
    kind: str      # ellipticity | boundedness | variables | sampling
    fatal: bool
    message: str
    witness: Optional[tuple] = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "fatal": self.fatal, "message": self.message}
        if self.witness is not None:
            d["witness"] = list(self.witness)
        return d


_PROBE_ANGLES = np.linspace(0.0, math.pi, 16, endpoint=False)


def validate_spec(p: ProblemSpec) -> list[Finding]:
    """Sampled admissibility checks of the diffusion block and the source."""
    findings: list[Finding] = []
    n = p.n_vars
    for kind, m, c in p.source.modes() + ([("affine", 1, p.source.affine)] if p.source.affine is not None else []):
        if ex.max_var_index(c) > n:
            findings.append(Finding("variables", True, f"source {kind} mode {m} uses a variable beyond x{n}"))
    for i in range(n):
        for j in range(i, n):
            if ex.max_var_index(p.diffusion.entry(i, j)) > n:
                findings.append(Finding("variables", True, f"a_{i + 1}{j + 1} uses a variable beyond x{n}"))
    if findings:
        return findings

    res = min(p.grid, 129) if n > 1 else p.grid
    pts = p.xprime_points(res)
    try:
        A = p.diffusion.values(pts)
    except ex.EvaluationError as err:
        return [Finding("sampling", True, f"diffusion entry cannot be evaluated: {err}")]

    if n == 1:
        q = A[:, 0, 0]
        k = int(np.argmin(q))
        if q[k] <= p.tolerances.pd:
            findings.append(Finding("ellipticity", True,
                                    f"positive-definiteness violated: a(x') = {q[k]:.6g} at sampled x1={pts[k, 0]:.6g}",
                                    tuple(pts[k])))
    else:
        dirs = np.stack([np.cos(_PROBE_ANGLES), np.sin(_PROBE_ANGLES)], axis=1) if n == 2 else _sphere_probes(n)
        quad = np.einsum("pij,di,dj->pd", A, dirs, dirs)
        eig_min = np.linalg.eigvalsh(A)[:, 0]
        worst = np.minimum(quad.min(axis=1), eig_min)
        k = int(np.argmin(worst))
        if worst[k] <= p.tolerances.pd:
            findings.append(Finding("ellipticity", True,
                                    f"positive-definiteness violated: min <A xi, xi> = {worst[k]:.6g}",
                                    tuple(pts[k])))

    # boundedness can only be probed: compare the base box with an enlarged one
    big_box = [(8 * lo, 8 * hi) for lo, hi in p.box]
    big_pts = ex.grid_points(ex.grid_axes(big_box, min(res, 65)))
    try:
        A_big = p.diffusion.values(big_pts)
        base = np.abs(A).max()
        grown = np.abs(A_big).max()
        if grown > 10.0 * max(base, 1.0):
            findings.append(Finding("boundedness", False,
                                    f"diffusion entries grow from {base:.3g} on the box to {grown:.3g} on the 8x box"))
    except ex.EvaluationError as err:
        findings.append(Finding("boundedness", False, f"diffusion entry fails on the enlarged box: {err}"))
    try:
        for kind, m, c in p.source.modes():
            ex.evaluate(c, pts)
        if p.source.affine is not None:
            ex.evaluate(p.source.affine, pts)
    except ex.EvaluationError as err:
        findings.append(Finding("sampling", True, f"source cannot be evaluated on the box: {err}"))
    return findings


def _sphere_probes(n: int) -> np.ndarray:
    rng = np.random.default_rng(0)
    v = rng.normal(size=(32, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
