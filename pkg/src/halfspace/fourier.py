"""Fourier analysis in x_N over one period (0, 2*pi).

Coefficients follow a_m = (1/pi) * int_0^{2pi} u cos(m x_N) dx_N and the same
with sin.  Samplers are callables ``f(points, xn) -> array (P, Q)`` where
``points`` has shape (P, n_vars); a TrigSeries is turned into one with
:func:`series_sampler`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .model import TrigSeries, synth_grid

Sampler = Callable[[np.ndarray, np.ndarray], np.ndarray]

TWO_PI = 2.0 * math.pi


def series_sampler(s: TrigSeries) -> Sampler:
    def f(points, xn):
        return synth_grid(s, points, xn)
    return f


def quadrature_nodes(Q: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite trapezoid on [0, 2pi] with Q intervals, weights include the 1/pi factor."""
    if Q < 4:
        raise ValueError("quadrature resolution must be at least 4")
    x = np.linspace(0.0, TWO_PI, Q + 1)
    w = np.full(Q + 1, (TWO_PI / Q) / math.pi)
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


def _weights(kind: str, m: int, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    if kind == "cos":
        return w * np.cos(m * x)
    if kind == "sin":
        return w * np.sin(m * x)
    raise ValueError(f"kind must be 'cos' or 'sin', got {kind!r}")


def coefficients_from_values(values: np.ndarray, m: int, kind: str) -> np.ndarray:
    """Coefficient of mode m from samples on the Q+1 trapezoid nodes (last axis)."""
    V = np.ascontiguousarray(np.atleast_2d(values), dtype=float)
    x, w = quadrature_nodes(V.shape[1] - 1)
    return kernels.project(V, np.ascontiguousarray(_weights(kind, m, x, w)))


@dataclass(frozen=True)
class CoefficientMeasurement:
    mode: int
    kind: str
    values: np.ndarray
    resolution: int
    error_bound: float

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "kind": self.kind,
            "resolution": self.resolution,
            "error_bound": self.error_bound,
            "min": float(self.values.min()) if self.values.size else 0.0,
            "max": float(self.values.max()) if self.values.size else 0.0,
        }


def analyze_mode(f: Sampler, m: int, kind: str, points, Q: int = 64) -> CoefficientMeasurement:
    """Trapezoid value of the mode-m coefficient at every x' point.

    The error bound compares against the same rule at Q/2 (when that is still
    a valid resolution).  For trigonometric polynomials of degree below Q/2
    both are exact and the bound is round-off sized.
    """
    if m < 0 or (kind == "sin" and m < 1):
        raise ValueError("cos modes start at 0, sin modes at 1")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, _ = quadrature_nodes(Q)
    V = np.asarray(f(pts, x), dtype=float)
    vals = coefficients_from_values(V, m, kind)
    err = 0.0
    if Q % 2 == 0 and Q // 2 >= 4:
        coarse = coefficients_from_values(V[:, ::2], m, kind)
        err = float(np.max(np.abs(vals - coarse))) if vals.size else 0.0
    return CoefficientMeasurement(m, kind, vals, Q, err)


def measure_all(f: Sampler, M: int, points, Q: int = 64):
    """Measured a_0..a_M and b_1..b_M, as arrays of shape (M+1, P) and (M, P)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, w = quadrature_nodes(Q)
    V = np.ascontiguousarray(f(pts, x), dtype=float)
    a = np.stack([kernels.project(V, np.ascontiguousarray(_weights("cos", m, x, w))) for m in range(M + 1)])
    b = np.stack([kernels.project(V, np.ascontiguousarray(_weights("sin", m, x, w))) for m in range(1, M + 1)]) \
        if M >= 1 else np.zeros((0, pts.shape[0]))
    return a, b


def parseval_check(f: Sampler, M: int, points, Q: int = 64) -> float:
    """max over points of |a0^2/2 + sum(a_m^2 + b_m^2) - (1/pi) int f^2|."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a, b = measure_all(f, M, pts, Q)
    x, w = quadrature_nodes(Q)
    V = np.asarray(f(pts, x), dtype=float)
    energy = (V ** 2) @ w
    spectral = 0.5 * a[0] ** 2 + (a[1:] ** 2).sum(axis=0) + (b ** 2).sum(axis=0)
    return float(np.max(np.abs(spectral - energy)))


# ---------------------------------------------------------------------------
# sign audit of sine coefficients

@dataclass
class AuditReport:
    tolerance: float
    max_mode: int
    b_values: dict = field(default_factory=dict)  # m -> (P,) array
    check_i: bool = True
    check_ii: bool = True
    witness_i: Optional[dict] = None
    witness_ii: Optional[dict] = None
    dichotomy: dict = field(default_factory=dict)  # m -> "vanishes" | "negative" | "mixed"

    @property
    def passed(self) -> bool:
        return self.check_i and self.check_ii and all(v != "mixed" for v in self.dichotomy.values())

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "max_mode": self.max_mode,
            "check_i_nonpositive": self.check_i,
            "check_ii_monotone_ratio": self.check_ii,
            "witness_i": self.witness_i,
            "witness_ii": self.witness_ii,
            "dichotomy": {str(m): v for m, v in self.dichotomy.items()},
            "b_range": {str(m): [float(v.min()), float(v.max())] for m, v in self.b_values.items()},
            "passed": self.passed,
        }


def audit_from_coefficients(b: dict, points: np.ndarray, tol: float) -> AuditReport:
    """Run checks (i)-(iii) on measured sine coefficients b[m], m >= 2."""
    modes = sorted(m for m in b if m >= 2)
    rep = AuditReport(tolerance=tol, max_mode=max(modes, default=1), b_values={m: b[m] for m in modes})
    pts = np.atleast_2d(points)
    for m in modes:
        bad = np.flatnonzero(b[m] > tol)
        if bad.size and rep.check_i:
            k = int(bad[np.argmax(b[m][bad])])
            rep.check_i = False
            rep.witness_i = {"mode": m, "point": [float(v) for v in pts[k]], "value": float(b[m][k])}
        if np.all(np.abs(b[m]) <= tol):
            rep.dichotomy[m] = "vanishes"
        elif np.all(b[m] < -tol):
            rep.dichotomy[m] = "negative"
        else:
            rep.dichotomy[m] = "mixed"
    for i, m in enumerate(modes):
        for n in modes[i + 1:]:
            gap = b[n] / n - (b[m] / m - tol)
            bad = np.flatnonzero(gap < 0)
            if bad.size and rep.check_ii:
                k = int(bad[np.argmin(gap[bad])])
                rep.check_ii = False
                rep.witness_ii = {"modes": [m, n], "point": [float(v) for v in pts[k]],
                                  "b_n_over_n": float(b[n][k] / n), "b_m_over_m": float(b[m][k] / m)}
    return rep


def coefficient_audit(u: Sampler, M: int, points, tol: float = 1e-9, Q: int = 64) -> AuditReport:
    """Sign audit of the sine coefficients b_2..b_M of a sampled field."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    _, b = measure_all(u, M, pts, Q)
    return audit_from_coefficients({m: b[m - 1] for m in range(2, M + 1)}, pts, tol)


def audit_table(xprime: np.ndarray, xn: np.ndarray, values: np.ndarray, M: int, tol: float = 1e-9) -> AuditReport:
    """Audit a tabulated field: ``values[p, q]`` at x' = xprime[p], x_N = xn[q].

    ``xn`` must be a uniform grid starting at 0 with a node at 2*pi; samples
    past the first period (a K-period dump from ``solve``) are dropped.
    """
    xn = np.asarray(xn, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if xn.size and xn[-1] > TWO_PI + 1e-6:
        hit = np.flatnonzero(np.abs(xn - TWO_PI) <= 1e-6)
        if not hit.size:
            raise ValueError("x_N samples span more than one period but have no node at 2*pi")
        xn, values = xn[:hit[0] + 1], values[:, :hit[0] + 1]
    Q = xn.size - 1
    if Q < 4 or abs(xn[0]) > 1e-9 or abs(xn[-1] - TWO_PI) > 1e-6 or np.ptp(np.diff(xn)) > 1e-6:
        raise ValueError("x_N samples must be uniform on [0, 2*pi] with at least 5 nodes")
    b = {m: coefficients_from_values(values, m, "sin") for m in range(2, M + 1)}
    return audit_from_coefficients(b, np.atleast_2d(xprime), tol)
