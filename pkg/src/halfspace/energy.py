"""Numeric counterparts of the energy estimate and the doubling argument (1-D in x')."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from . import expr as ex
from .expr import Expr

POINTS_PER_UNIT = 64
# exp(-1/t) is exactly 0.0 in double precision for t below this
_T_FLOOR = 1e-3


# ---------------------------------------------------------------------------
# cutoff

def _s(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > _T_FLOOR
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _ds(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > _T_FLOOR
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def smooth_step(t):
    """0 for t <= 0, 1 for t >= 1, C-infinity in between."""
    a, b = _s(t), _s(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


def smooth_step_derivative(t):
    t = np.asarray(t, dtype=float)
    a, b = _s(t), _s(1.0 - t)
    da, db = _ds(t), -_ds(1.0 - t)
    return (da * (a + b) - a * (da + db)) / (a + b) ** 2


def cutoff(x, R: float):
    """phi_R(x) = 1 on |x| <= R, 0 on |x| >= 2R."""
    return smooth_step((2.0 * R - np.abs(x)) / R)


def cutoff_gradient(x, R: float):
    """|d phi_R / dx|."""
    return np.abs(smooth_step_derivative((2.0 * R - np.abs(x)) / R)) / R


@dataclass(frozen=True)
class CutoffProfile:
    R: float
    x: np.ndarray
    phi: np.ndarray
    grad: np.ndarray

    @property
    def gradient_bound(self) -> float:
        return float(self.grad.max())

    @property
    def constant(self) -> float:
        """sup |phi_R'| * R, which should not depend on R."""
        return self.gradient_bound * self.R

    def to_dict(self) -> dict:
        return {"R": self.R, "sup_grad": self.gradient_bound, "C": self.constant,
                "phi_min": float(self.phi.min()), "phi_max": float(self.phi.max())}


def cutoff_profile(R: float, per_unit: int = POINTS_PER_UNIT) -> CutoffProfile:
    if R <= 0:
        raise ValueError("R must be positive")
    n = max(int(math.ceil(6 * R * per_unit)), 64) | 1
    x = np.linspace(-3 * R, 3 * R, n)
    return CutoffProfile(R, x, cutoff(x, R), cutoff_gradient(x, R))


def cutoff_stability(radii: Sequence[float] = (1, 2, 4, 8)) -> float:
    """Relative spread (max - min) / min of the measured constants."""
    cs = [cutoff_profile(R).constant for R in radii]
    return (max(cs) - min(cs)) / min(cs)


# ---------------------------------------------------------------------------
# Caccioppoli

@dataclass
class CaccioppoliRow:
    R: float
    lhs: float                 # int_{B_R} (v+)^2
    rhs: float                 # C/(lam R^2) int_{B_2R} (v+)^2
    sharp_lhs: float           # lam int phi^2 (v+)^2
    sharp_rhs: float           # int phi'^2 (v+)^2
    holds: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CaccioppoliReport:
    lam: float
    constant: float
    hypothesis_met: bool
    rows: list = field(default_factory=list)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.hypothesis_met and all(r.holds for r in self.rows)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "C": self.constant, "hypothesis_met": self.hypothesis_met,
                "message": self.message, "rows": [r.to_dict() for r in self.rows], "passed": self.passed}


def _integral(y: np.ndarray, x: np.ndarray) -> float:
    return float(simpson(y, x=x))


def caccioppoli_check(v: Expr, lam: float, radii: Sequence[float] = (1, 2, 4),
                      tol: float = 1e-9) -> CaccioppoliReport:
    """Check int_{B_R}(v+)^2 <= C/(lam R^2) int_{B_2R}(v+)^2 for a subsolution of -v'' + lam v <= 0.

    C = (sup|phi_R'| R)^2 comes from the cutoff above (Young's inequality with
    weight 1/2 on both sides).
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if ex.max_var_index(v) > 1:
        raise ValueError("v must depend on x1 only")
    C = max(cutoff_profile(R).constant for R in radii) ** 2
    rep = CaccioppoliReport(lam, C, True)

    big = 2.0 * max(radii)
    n = int(math.ceil(2 * big * POINTS_PER_UNIT)) | 1
    xs = np.linspace(-big, big, n).reshape(-1, 1)
    vv = ex.evaluate(v, xs)
    sub = -ex.evaluate(ex.differentiate(ex.differentiate(v, 1), 1), xs) + lam * vv
    scale = np.maximum(1.0, lam * np.abs(vv))
    bad = np.flatnonzero(sub > tol * scale)
    if bad.size:
        k = int(bad[np.argmax(sub[bad] / scale[bad])])
        rep.hypothesis_met = False
        rep.message = (f"hypothesis not met: -v'' + lambda v = {sub[k]:.6g} > 0 at x1 = {xs[k, 0]:.6g}")
        return rep

    for R in radii:
        m = int(math.ceil(4 * R * POINTS_PER_UNIT)) | 1
        x = np.linspace(-2 * R, 2 * R, m)
        vp = np.maximum(ex.evaluate(v, x.reshape(-1, 1)), 0.0)
        xi = np.linspace(-R, R, (m // 2) | 1)
        vpi = np.maximum(ex.evaluate(v, xi.reshape(-1, 1)), 0.0)
        lhs = _integral(vpi ** 2, xi)
        total = _integral(vp ** 2, x)
        rhs = C / (lam * R * R) * total
        phi = cutoff(x, R)
        sharp_l = lam * _integral(phi ** 2 * vp ** 2, x)
        sharp_r = _integral(cutoff_gradient(x, R) ** 2 * vp ** 2, x)
        slack = 1e-12 * max(1.0, rhs)
        rep.rows.append(CaccioppoliRow(float(R), lhs, rhs, sharp_l, sharp_r,
                                       bool(lhs <= rhs + slack and sharp_l <= sharp_r + 1e-9 * max(1.0, sharp_r))))
    rep.message = "inequality holds at every R" if rep.passed else "inequality fails at some R"
    return rep


# ---------------------------------------------------------------------------
# doubling argument

@dataclass(frozen=True)
class DoublingWitness:
    R0: float
    theta: float
    gamma: float
    C: float
    radii: tuple
    values: tuple

    @classmethod
    def sample(cls, I, R0: float, theta: float, gamma: float, C: float, count: int = 6) -> "DoublingWitness":
        radii = tuple(R0 * 2.0 ** k for k in range(count))
        return cls(R0, theta, gamma, C, radii, tuple(float(I(R)) for R in radii))


@dataclass
class DoublingConclusion:
    conclusion: str                 # "vanishes" | "premise failed"
    k: Optional[int] = None
    premise: Optional[str] = None
    witness_R: Optional[float] = None
    detail: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def doubling_check(w: DoublingWitness, tol: float = 1e-9) -> DoublingConclusion:
    if not (w.theta > 0 and w.gamma > 0):
        raise ValueError("theta and gamma must be positive")
    if w.theta >= 2.0 ** (-w.gamma):
        raise ValueError(f"theta = {w.theta:g} must be below 2^-gamma = {2.0 ** -w.gamma:g}")
    radii, vals = list(w.radii), list(w.values)
    if any(v < 0 for v in vals):
        raise ValueError("I must be nonnegative")
    by_r = dict(zip(radii, vals))
    for R, v in zip(radii, vals):
        if R * 2 in by_r and v > w.theta * by_r[R * 2] + tol:
            return DoublingConclusion("premise failed", premise="I(R) <= theta I(2R)", witness_R=R,
                                      detail=f"I({R:g}) = {v:.6g} > theta I({2 * R:g}) = {w.theta * by_r[R * 2]:.6g}")
        if v > w.C * R ** w.gamma + tol:
            return DoublingConclusion("premise failed", premise="I(R) <= C R^gamma", witness_R=R,
                                      detail=f"I({R:g}) = {v:.6g} > C R^gamma = {w.C * R ** w.gamma:.6g}")
    if all(v <= tol for v in vals):
        return DoublingConclusion("vanishes", k=0, detail="every sample is within tolerance of zero")
    q = w.theta * 2.0 ** w.gamma
    R = radii[0]
    k = 0
    bound = w.C * R ** w.gamma
    while bound >= tol:
        k += 1
        bound *= q
    return DoublingConclusion("vanishes", k=k,
                              detail=f"C (theta 2^gamma)^k R^gamma < {tol:g} at R = {R:g} after k = {k} doublings")
