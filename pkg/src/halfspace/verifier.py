"""Independent checks of candidate solutions.

Residuals are computed mode by mode from the exact symbolic coefficients, so
for a correct payload they vanish up to evaluation round-off.  The
finite-difference cross-check lives in :mod:`halfspace.oracle` and the
energy-estimate checks in :mod:`halfspace.energy`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from . import expr as ex
from . import kernels
from .coefficients import apply_div_form
from .fourier import Sampler, coefficient_audit, series_sampler
from .model import ProblemSpec, TrigSeries, series_derivative_xn, trig_basis

TWO_PI = 2.0 * math.pi

# x' resolution per axis used for 2-variable grids (a full 257^2 x 257 scan is
# affordable but slow for multi-mode residuals)
GRID_CAP_2D = 65


def _xprime_points(p: ProblemSpec, resolution: Optional[int] = None) -> np.ndarray:
    res = resolution or p.grid
    if p.n_vars > 1:
        res = min(res, GRID_CAP_2D)
    return p.xprime_points(res)


def _reduce(s: TrigSeries, points: np.ndarray, xn: np.ndarray):
    modes = s.basis_modes()
    if not modes:
        return 0.0, 0, 0, 0.0, 0, 0, 0.0
    C = np.ascontiguousarray(s.coefficient_matrix(points, modes))
    B = np.ascontiguousarray(trig_basis(modes, xn))
    return kernels.synth_reduce(C, B)


# ---------------------------------------------------------------------------
# nonnegativity

@dataclass(frozen=True)
class ScanResult:
    minimum: float
    witness: tuple      # (x'..., x_N)
    maximum: float
    rejected: bool

    def to_dict(self) -> dict:
        return {"min": self.minimum, "witness": list(self.witness), "max": self.maximum,
                "rejected": self.rejected}


def nonnegativity_scan(u: TrigSeries, p: ProblemSpec, refine: bool = True) -> ScanResult:
    """Minimum of u over the verification box times K periods in x_N.

    The grid minimum is polished by a bounded 1-D search in x_N around the
    grid witness, so the reported value is the local minimum rather than
    whatever grid node happened to be closest.
    """
    pts = _xprime_points(p)
    xn = p.xn_grid()
    vmin, pi_, qi, vmax, _, _, _ = _reduce(u, pts, xn)
    xp = pts[pi_]
    x_best = float(xn[qi])
    if refine and u.basis_modes():
        step = xn[1] - xn[0]
        lo, hi = max(0.0, x_best - step), min(float(xn[-1]), x_best + step)
        C = u.coefficient_matrix(xp.reshape(1, -1), u.basis_modes())[0]

        def f(t):
            return float(C @ trig_basis(u.basis_modes(), np.array([t]))[:, 0])

        if hi > lo:
            r = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            if r.fun < vmin:
                vmin, x_best = float(r.fun), float(r.x)
    witness = tuple(float(v) for v in xp) + (x_best,)
    return ScanResult(float(vmin), witness, float(vmax), bool(vmin < -p.tolerances.zero))


# ---------------------------------------------------------------------------
# residuals

def residual_series(u: TrigSeries, p: ProblemSpec) -> TrigSeries:
    """R = -div(A grad u) - u + g, exactly, as a series with Expr coefficients.

    With L = div'(A grad' .):  mode m (m >= 1): -L c + m^2 c - c + g_m;
    mode 0: -L a0 - a0 + c0 (a0 convention); affine part: -L k - k + g_k.
    """
    A = p.diffusion
    g = p.source

    def mode(c: ex.Expr, m: int, gm: ex.Expr) -> ex.Expr:
        r = ex.neg(apply_div_form(A, c))
        r = ex.add(r, ex.mul(ex.const(float(m * m - 1)), c))
        return ex.add(r, gm)

    cos = {}
    for m in sorted(set(u.cos) | set(g.cos)):
        cos[m] = mode(u.a(m), m, g.a(m))
    sin = {}
    for m in sorted(set(u.sin) | set(g.sin)):
        sin[m] = mode(u.b(m), m, g.b(m))
    affine = None
    if u.affine is not None or g.affine is not None:
        affine = mode(u.affine or ex.ZERO, 0, g.affine or ex.ZERO)
    return TrigSeries(u.n_vars, cos, sin, affine)


def residual(u: TrigSeries, p: ProblemSpec) -> tuple[TrigSeries, float]:
    """Residual series and its sup over the verification grid."""
    r = residual_series(u, p)
    *_, sup = _reduce(r, _xprime_points(p), p.xn_grid())
    return r, float(sup)


# ---------------------------------------------------------------------------
# boundary traces

@dataclass(frozen=True)
class TraceReport:
    u_bottom: float
    uN_bottom: float
    u_top: float
    uN_top: float

    def to_dict(self) -> dict:
        return {"u(.,0)": self.u_bottom, "u_N(.,0)": self.uN_bottom,
                "u(.,2pi)": self.u_top, "u_N(.,2pi)": self.uN_top}


def trace_check(u: Union[TrigSeries, Sampler], p: ProblemSpec, h: float = 1e-5) -> TraceReport:
    """Sups over the x' grid of |u|, |u_N| at x_N = 0 and x_N = 2pi.

    Series are differentiated exactly; plain samplers use one-sided
    second-order differences with step ``h``.
    """
    pts = _xprime_points(p)
    ends = np.array([0.0, TWO_PI])
    if isinstance(u, TrigSeries):
        from .model import synth_grid
        U = synth_grid(u, pts, ends)
        D = synth_grid(series_derivative_xn(u, 1), pts, ends)
    else:
        U = np.asarray(u(pts, ends))
        x0 = np.array([0.0, h, 2 * h])
        x1 = np.array([TWO_PI, TWO_PI - h, TWO_PI - 2 * h])
        f0, f1 = np.asarray(u(pts, x0)), np.asarray(u(pts, x1))
        d0 = (-3 * f0[:, 0] + 4 * f0[:, 1] - f0[:, 2]) / (2 * h)
        d1 = (3 * f1[:, 0] - 4 * f1[:, 1] + f1[:, 2]) / (2 * h)
        D = np.stack([d0, d1], axis=1)
    sup = lambda a: float(np.max(np.abs(a)))  # noqa: E731
    return TraceReport(sup(U[:, 0]), sup(D[:, 0]), sup(U[:, 1]), sup(D[:, 1]))


# ---------------------------------------------------------------------------
# strip bound

def strip_bound(u: TrigSeries, p: ProblemSpec) -> list[float]:
    """Sampled max of u over each period [2pi k, 2pi (k+1)], k < K."""
    pts = _xprime_points(p)
    per = max(p.grid // p.periods, 8)
    out = []
    for k in range(p.periods):
        xn = np.linspace(TWO_PI * k, TWO_PI * (k + 1), per)
        out.append(float(_reduce(u, pts, xn)[3]))
    return out


# ---------------------------------------------------------------------------
# report

@dataclass
class VerificationReport:
    residual_sup: float
    traces: TraceReport
    scan: ScanResult
    strip_bound: list
    tolerances: dict
    audit: Optional[dict] = None
    oracle: Optional[dict] = None
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        ok = (self.residual_sup <= self.tolerances["residual"]
              and self.scan.minimum >= -self.tolerances["zero"]
              and self.traces.u_bottom <= self.tolerances["zero"])
        if self.oracle is not None and "passed" in self.oracle:
            ok = ok and bool(self.oracle["passed"])
        return ok

    def to_dict(self) -> dict:
        d = {
            "passed": self.passed,
            "residual_sup": self.residual_sup,
            "traces": self.traces.to_dict(),
            "nonnegativity": self.scan.to_dict(),
            "strip_bound_per_period": list(self.strip_bound),
            "tolerances": dict(self.tolerances),
            "notes": list(self.notes),
        }
        if self.audit is not None:
            d["coefficient_audit"] = self.audit
        if self.oracle is not None:
            d["oracle"] = self.oracle
        return d


def verify(u: TrigSeries, p: ProblemSpec, audit: bool = True, oracle: bool = False) -> VerificationReport:
    _, sup = residual(u, p)
    rep = VerificationReport(
        residual_sup=sup,
        traces=trace_check(u, p),
        scan=nonnegativity_scan(u, p),
        strip_bound=strip_bound(u, p),
        tolerances={"zero": p.tolerances.zero, "residual": p.tolerances.residual},
    )
    if audit and u.affine is None:
        M = max(u.max_mode, 2)
        pts = _xprime_points(p, 33)
        rep.audit = coefficient_audit(series_sampler(u), M, pts, p.tolerances.zero, Q=max(64, 4 * M + 4)).to_dict()
    elif audit:
        rep.notes.append("coefficient audit skipped: affine x_N part is not periodic")
    if oracle:
        from .oracle import oracle_convergence
        rep.oracle = oracle_convergence(p, u).to_dict()
        rep.notes.append("oracle boundary data is taken from the candidate: consistency check, not uniqueness")
    return rep
