import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halfspace import expr as ex
from halfspace.energy import (DoublingWitness, caccioppoli_check, cutoff, cutoff_profile, cutoff_stability,
                              doubling_check, smooth_step)


@pytest.mark.parametrize("R", [0.5, 1, 2, 4, 8])
def test_cutoff_shape(R):
    prof = cutoff_profile(R)
    inside = np.abs(prof.x) <= R
    outside = np.abs(prof.x) >= 2 * R
    assert np.all(prof.phi[inside] == 1.0) and np.all(prof.phi[outside] == 0.0)
    assert prof.phi.min() >= 0.0 and prof.phi.max() <= 1.0


def test_cutoff_constant_is_stable():
    assert cutoff_stability((1, 2, 4, 8)) < 0.05


def test_cutoff_rejects_bad_radius():
    with pytest.raises(ValueError):
        cutoff_profile(0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 2), st.floats(-1, 2))
def test_smooth_step_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert smooth_step(lo) <= smooth_step(hi) + 1e-15


R3 = math.sqrt(3.0)


def test_caccioppoli_holds_for_cosh():
    rep = caccioppoli_check(ex.parse_expr(f"0.5*(exp({R3!r}*x1) + exp(-{R3!r}*x1))", 1), 3.0)
    assert rep.hypothesis_met and rep.passed
    assert [r.R for r in rep.rows] == [1.0, 2.0, 4.0]


def test_caccioppoli_trivial_for_negative_v():
    rep = caccioppoli_check(ex.const(-1.0), 3.0)
    assert rep.passed and all(r.lhs == 0.0 and r.rhs == 0.0 for r in rep.rows)


def test_caccioppoli_rejects_non_subsolution():
    rep = caccioppoli_check(ex.const(1.0), 3.0)
    assert not rep.hypothesis_met and "hypothesis not met" in rep.message


def test_caccioppoli_input_checks():
    with pytest.raises(ValueError):
        caccioppoli_check(ex.const(-1.0), 0.0)
    with pytest.raises(ValueError):
        caccioppoli_check(ex.parse_expr("x2", 2), 1.0)


def test_doubling_vanishes_for_zero():
    out = doubling_check(DoublingWitness.sample(lambda R: 0.0, 1.0, 0.2, 1.0, 1.0))
    assert out.conclusion == "vanishes" and out.k == 0


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_doubling_power_law_breaks_premise(gamma):
    theta = 0.9 * 2.0 ** -gamma
    out = doubling_check(DoublingWitness.sample(lambda R: R ** gamma, 1.0, theta, gamma, 10.0))
    assert out.conclusion == "premise failed" and out.premise == "I(R) <= theta I(2R)"
    assert out.witness_R == 1.0


def test_doubling_for_bounded_bump():
    xs = np.linspace(-1, 1, 2001)
    total = float(np.trapezoid(np.maximum(0.0, 1 - xs ** 2) ** 2, xs))

    def I(R):
        x = np.linspace(-min(R, 1), min(R, 1), 2001)
        return float(np.trapezoid(np.maximum(0.0, 1 - x ** 2) ** 2, x))

    out = doubling_check(DoublingWitness.sample(I, 0.25, 0.3, 1.0, 10.0))
    assert out.conclusion == "premise failed"
    assert I(8.0) == pytest.approx(total)


def test_doubling_iteration_count():
    w = DoublingWitness(1.0, 0.25, 1.0, 1.0, (1.0, 2.0), (1e-3, 0.01))
    out = doubling_check(w)
    assert out.conclusion == "vanishes"
    # C (theta 2^gamma)^k R^gamma = 0.5^k drops below 1e-9 at k = 30
    assert out.k == math.ceil(math.log(1e-9) / math.log(0.5))


def test_doubling_contract():
    with pytest.raises(ValueError):
        doubling_check(DoublingWitness(1.0, 0.5, 1.0, 1.0, (1.0,), (0.0,)))
    with pytest.raises(ValueError):
        doubling_check(DoublingWitness(1.0, 0.1, 1.0, 1.0, (1.0,), (-1.0,)))


def test_smooth_step_derivative_finite_near_zero():
    from halfspace.energy import smooth_step_derivative
    t = np.array([0.0, 1e-310, 1e-300, 1e-5, 0.5, 1 - 1e-300, 1.0])
    d = smooth_step_derivative(t)
    assert np.all(np.isfinite(d)) and d[0] == 0.0 and d[-1] == 0.0
