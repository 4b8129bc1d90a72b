import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halfspace import expr as ex
from halfspace.model import TrigSeries, synth_grid
from halfspace.verifier import (nonnegativity_scan, residual, residual_series, strip_bound, trace_check,
                                verify)

from conftest import make_spec

MODEL = TrigSeries.from_constants(1, {0: 2.0, 1: -1.0})


def test_model_residual_is_exactly_zero():
    _, sup = residual(MODEL, make_spec({"c": {"0": "2"}}))
    assert sup == 0.0


@pytest.mark.parametrize("eps", [1e-3, 0.1, 2.0])
def test_residual_of_perturbed_model(eps):
    u = MODEL + TrigSeries.from_constants(1, {}, {2: eps})
    _, sup = residual(u, make_spec({"c": {"0": "2"}}))
    assert sup == pytest.approx(3 * eps, rel=1e-9)


@pytest.mark.parametrize("A", [-1.0, 0.0, 0.5, 1.0, 3.0])
def test_family_members_have_zero_residual(A):
    u = TrigSeries.from_constants(1, {}, {1: A}, affine=1.0)
    _, sup = residual(u, make_spec({"affine_xn": "1"}))
    assert sup <= 1e-14


def test_residual_with_variable_diffusion():
    p = make_spec({"c": {"0": "2"}}, A={"kind": "scalar_expr", "entry": "1+0.5*sin(x1)"})
    _, sup = residual(MODEL, p)
    assert sup <= 1e-14
    u = TrigSeries(1, {0: ex.parse_expr("x1^2", 1)})
    r = residual_series(u, p)
    # -L(x1^2) - x1^2 + 2, with L = d/dx (a d/dx)
    x = 0.7
    want = -(0.5 * math.cos(x) * 2 * x + (1 + 0.5 * math.sin(x)) * 2) - x * x + 2
    assert ex.eval_expr(r.a(0), [x]) == pytest.approx(want)


def test_scan_of_model():
    s = nonnegativity_scan(MODEL, make_spec({"c": {"0": "2"}}))
    assert s.minimum == pytest.approx(0.0, abs=1e-15) and not s.rejected
    assert s.witness[-1] % (2 * math.pi) == pytest.approx(0.0, abs=1e-6) or \
        s.witness[-1] == pytest.approx(2 * math.pi, abs=1e-6)


def test_scan_rejects_family_member_outside_range():
    u = TrigSeries.from_constants(1, {}, {1: -1.5}, affine=1.0)
    s = nonnegativity_scan(u, make_spec({"affine_xn": "1"}))
    assert s.rejected
    # the sampled minimum sits at the true local minimum, not at x_N = 0.1
    assert s.minimum == pytest.approx(math.acos(1 / 1.5) - 1.5 * math.sin(math.acos(1 / 1.5)), abs=1e-9)
    assert 0.1 - 1.5 * math.sin(0.1) == pytest.approx(-0.0497, rel=0.1)


def test_scan_of_odd_candidate():
    u = TrigSeries.from_constants(1, {}, {1: 2 / 3, 2: -1 / 3})
    s = nonnegativity_scan(u, make_spec({"d": {"2": "1"}}))
    assert s.rejected and math.pi < s.witness[-1] % (2 * math.pi) < 2 * math.pi


def test_trace_check_examples():
    p = make_spec({"c": {"0": "2"}})
    t = trace_check(MODEL, p)
    assert max(t.u_bottom, t.uN_bottom, t.u_top, t.uN_top) <= 1e-15
    fam = TrigSeries.from_constants(1, {}, {1: 1.0}, affine=1.0)
    assert trace_check(fam, p).u_top == pytest.approx(2 * math.pi)
    sin = TrigSeries.from_constants(1, {}, {1: 1.0})
    assert trace_check(sin, p).uN_bottom == pytest.approx(1.0)


def test_trace_check_on_sampler_matches_series():
    p = make_spec({"c": {"0": "2"}}, grid=33)
    u = TrigSeries(1, {0: ex.parse_expr("atan(x1)", 1), 2: ex.parse_expr("cos(x1)", 1)}, {1: ex.const(0.4)})
    exact = trace_check(u, p)
    approx = trace_check(lambda pts, xn: synth_grid(u, pts, xn), p)
    for a, b in zip(exact.to_dict().values(), approx.to_dict().values()):
        assert a == pytest.approx(b, abs=1e-6)


def test_strip_bound():
    b = strip_bound(MODEL, make_spec({"c": {"0": "2"}}, periods=3))
    assert len(b) == 3 and all(v == pytest.approx(2.0, abs=1e-3) for v in b)


def test_verify_report():
    rep = verify(MODEL, make_spec({"c": {"0": "2"}}))
    assert rep.passed and rep.audit["passed"]
    d = rep.to_dict()
    assert d["residual_sup"] == 0.0 and d["nonnegativity"]["rejected"] is False
    bad = verify(MODEL + TrigSeries.from_constants(1, {}, {2: 1e-3}), make_spec({"c": {"0": "2"}}))
    assert not bad.passed


def test_verify_family_skips_audit():
    rep = verify(TrigSeries.from_constants(1, {}, {1: 0.5}, affine=1.0), make_spec({"affine_xn": "1"}))
    assert rep.audit is None and rep.notes


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_residual_is_additive(a, b, c, d):
    # residual(u1 + u2, g1 + g2) = residual(u1, g1) + residual(u2, g2)
    u1 = TrigSeries.from_constants(1, {0: a, 2: b})
    u2 = TrigSeries(1, {3: ex.mul(ex.const(c), ex.parse_expr("atan(x1)", 1))}, {1: ex.const(d)})
    p1 = make_spec({"c": {"0": "1", "2": "x1"}})
    p2 = make_spec({"c": {"3": "cos(x1)"}, "d": {"2": "2"}})
    p12 = make_spec({"c": {"0": "1", "2": "x1", "3": "cos(x1)"}, "d": {"2": "2"}})
    pts = np.linspace(-3, 3, 7).reshape(-1, 1)
    xn = np.linspace(0, 2 * math.pi, 9)
    R = synth_grid(residual_series(u1 + u2, p12), pts, xn)
    R1 = synth_grid(residual_series(u1, p1), pts, xn)
    R2 = synth_grid(residual_series(u2, p2), pts, xn)
    assert np.allclose(R, R1 + R2, atol=1e-12)
