"""Equations satisfied by the Fourier coefficients of a solution.

For u = a0/2 + sum (a_m cos + b_m sin) on the strip and L = div'(A grad' .):

    L a_m = (m^2 - 1) a_m + c_m + (1/pi) (u_N(., 0) - u_N(., 2pi))     m >= 0
    L b_m = (m^2 - 1) b_m + d_m + (m/pi) u(., 2pi)                       m >= 1

The boundary terms ("traces") are carried as tags.  Discharging them is the
job of :func:`discharge_traces`, which follows the sign conditions on the
first source modes c_1, d_1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import expr as ex
from .expr import Expr
from .model import DiffusionMatrix, ProblemSpec, TrigSeries

T_FLUX = "T_flux"  # (1/pi)(u_N(., 0) - u_N(., 2pi))
T_VAL = "T_val"    # (m/pi) u(., 2pi)

UNKNOWN = "unknown"
PROVEN_ZERO = "proven-zero"


def apply_div_form(A: DiffusionMatrix, e: Expr) -> Expr:
    """sum_i d_i ( sum_j a_ij d_j e ), expanded symbolically."""
    n = A.n_minus_1
    grads = [ex.differentiate(e, j + 1) for j in range(n)]
    out = ex.ZERO
    for i in range(n):
        flux = ex.ZERO
        for j in range(n):
            flux = ex.add(flux, ex.mul(A.entry(i, j), grads[j]))
        out = ex.add(out, ex.differentiate(flux, i + 1))
    return out


# ---------------------------------------------------------------------------
# source coefficients

def source_coefficient(g: TrigSeries, kind: str, m: int) -> Expr:
    """Fourier coefficient of g on (0, 2pi), including the affine part.

    kappa * x_N contributes 2*pi*kappa to c_0 and -2*kappa/m to d_m.
    """
    if kind == "cos":
        c = g.a(m)
        if m == 0 and g.affine is not None:
            c = ex.add(c, ex.mul(ex.const(2.0 * math.pi), g.affine))
        return c
    d = g.b(m)
    if g.affine is not None:
        d = ex.add(d, ex.mul(ex.const(-2.0 / m), g.affine))
    return d


@dataclass(frozen=True)
class CoefficientEquation:
    mode: int
    kind: str           # "cos" | "sin"
    source: Expr        # c_m or d_m
    trace: str          # T_FLUX for cos, T_VAL for sin
    trace_status: str = UNKNOWN
    rule: Optional[str] = None

    @property
    def lam(self) -> int:
        return self.mode * self.mode - 1

    @property
    def trace_factor(self) -> float:
        return 1.0 / math.pi if self.kind == "cos" else self.mode / math.pi

    def residual(self, A: DiffusionMatrix, coeff: Expr, trace_value: Expr = ex.ZERO) -> Expr:
        """L coeff - lam*coeff - source - factor*trace (zero for an exact solution)."""
        r = ex.sub(ex.sub(apply_div_form(A, coeff), ex.mul(ex.const(float(self.lam)), coeff)), self.source)
        if self.trace_status != PROVEN_ZERO:
            r = ex.sub(r, ex.mul(ex.const(self.trace_factor), trace_value))
        return r

    def describe(self) -> str:
        tr = "0" if self.trace_status == PROVEN_ZERO else (
            "(1/pi)(u_N(.,0) - u_N(.,2pi))" if self.kind == "cos" else f"({self.mode}/pi) u(.,2pi)")
        coef = "a" if self.kind == "cos" else "b"
        return f"L {coef}_{self.mode} = {self.lam}*{coef}_{self.mode} + ({ex.to_text(self.source)}) + {tr}"

    def to_dict(self) -> dict:
        return {"mode": self.mode, "kind": self.kind, "lambda": self.lam,
                "source": ex.to_text(self.source), "trace": self.trace,
                "trace_status": self.trace_status, "rule": self.rule}


def build_system(p: ProblemSpec, M: Optional[int] = None) -> list[CoefficientEquation]:
    g = p.source
    if M is None:
        M = max(g.max_mode, 1)
    if g.max_mode > M:
        raise ValueError(f"source has modes up to {g.max_mode}, beyond M={M}")
    eqs = [CoefficientEquation(m, "cos", source_coefficient(g, "cos", m), T_FLUX) for m in range(M + 1)]
    eqs += [CoefficientEquation(m, "sin", source_coefficient(g, "sin", m), T_VAL) for m in range(1, M + 1)]
    return eqs


# ---------------------------------------------------------------------------
# trace discharge

@dataclass(frozen=True)
class TraceAssumption:
    value_top: bool = False   # u(., 2pi) == 0
    flux_bottom: bool = False  # u_N(., 0) == 0
    flux_top: bool = False    # u_N(., 2pi) == 0
    rule: Optional[str] = None

    def __post_init__(self):
        if self.value_top and not self.flux_top:
            # each (x', 2pi) is then a minimum point of a nonnegative u
            raise ValueError("u(.,2pi) = 0 for a nonnegative u forces u_N(.,2pi) = 0")

    @property
    def all_zero(self) -> bool:
        return self.value_top and self.flux_bottom and self.flux_top

    def to_dict(self) -> dict:
        return {"u_top": self.value_top, "uN_bottom": self.flux_bottom, "uN_top": self.flux_top,
                "rule": self.rule}


@dataclass(frozen=True)
class SignEvidence:
    name: str
    minimum: float
    maximum: float
    argmin: tuple
    argmax: tuple
    level: str  # "symbolic: constant" | "grid scan"

    def classify(self, tol: float) -> str:
        """'zero' | 'nonneg' | 'negative' | 'indefinite' | 'borderline'."""
        if max(abs(self.minimum), abs(self.maximum)) <= tol:
            return "zero"
        if self.minimum >= -tol:
            return "nonneg" if self.maximum > 10.0 * tol else "borderline"
        if self.maximum > tol:
            return "indefinite"
        return "negative"

    def to_dict(self) -> dict:
        return {"name": self.name, "min": self.minimum, "max": self.maximum,
                "argmin": list(self.argmin), "argmax": list(self.argmax), "level": self.level}


def sign_evidence(name: str, e: Expr, p: ProblemSpec) -> SignEvidence:
    if ex.is_constant_node(e):
        v = ex.eval_expr(e, np.zeros(p.n_vars))
        origin = tuple(0.0 for _ in range(p.n_vars))
        return SignEvidence(name, v, v, origin, origin, "symbolic: constant")
    res = p.grid if p.n_vars == 1 else min(p.grid, 129)
    prof = ex.sample_expr(e, p.box, res)
    return SignEvidence(name, prof.minimum, prof.maximum, prof.argmin, prof.argmax, "grid scan")


@dataclass
class DischargeResult:
    system: list
    traces: TraceAssumption
    evidence: dict = field(default_factory=dict)   # name -> SignEvidence
    nonexistence: Optional[str] = None              # rule id when a sign rule excludes solutions
    obstructions: list = field(default_factory=list)


LOW_DIMENSION = (2, 3)


def discharge_traces(system: list, p: ProblemSpec) -> DischargeResult:
    """Settle the trace terms from the signs of d_1 and then c_1.

    Only in dimension 2 or 3; above that the traces stay unknown unless the
    caller asserted them through ``p.passo_base``.
    """
    tol = p.tolerances.zero
    d1 = source_coefficient(p.source, "sin", 1)
    c1 = source_coefficient(p.source, "cos", 1)
    ev_d = sign_evidence("d1", d1, p)
    ev_c = sign_evidence("c1", c1, p)
    out = DischargeResult(system, TraceAssumption(), {"d1": ev_d, "c1": ev_c})

    if p.dimension not in LOW_DIMENSION:
        if p.passo_base:
            out.traces = TraceAssumption(True, True, True, rule="asserted")
            out.system = _mark(system, {"cos", "sin"}, "asserted")
        else:
            out.obstructions.append(
                f"dimension {p.dimension}: traces u(.,2pi), u_N(.,0) not provable without the Liouville step")
        return out

    sd = ev_d.classify(tol)
    if sd == "nonneg":
        out.nonexistence = "R-D1-POS"
        return out
    if sd != "zero":
        out.obstructions.append({
            "negative": "d1 < 0 somewhere: the sign hypothesis on d1 fails, traces undischarged",
            "indefinite": "sign-indefinite d1",
            "borderline": "d1 >= 0 but its size is within 10*tol_zero of zero: borderline, not decided",
        }[sd])
        return out
    traces = TraceAssumption(value_top=True, flux_bottom=False, flux_top=True, rule="R-D1-ZERO")
    system = _mark(system, {"sin"}, "R-D1-ZERO")

    sc = ev_c.classify(tol)
    if sc == "nonneg":
        out.nonexistence = "R-C1-POS"
        out.traces, out.system = traces, system
        return out
    if sc != "zero":
        out.obstructions.append({
            "negative": "c1 < 0 somewhere: u_N(.,0) undischarged",
            "indefinite": "sign-indefinite c1",
            "borderline": "c1 >= 0 but its size is within 10*tol_zero of zero: borderline, not decided",
        }[sc])
        out.traces, out.system = traces, system
        return out
    out.traces = TraceAssumption(True, True, True, rule="R-D1-ZERO+R-C1-ZERO")
    out.system = _mark(system, {"cos"}, "R-C1-ZERO")
    return out


def _mark(system: list, kinds: set, rule: str) -> list:
    return [replace(eq, trace_status=PROVEN_ZERO, rule=rule) if eq.kind in kinds else eq for eq in system]
