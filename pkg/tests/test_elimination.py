from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halfspace import expr as ex
from halfspace.classifier import construct_series_1d
from halfspace.elimination import (Affine, eliminate, eliminate_cos_chain, initial_state, sample_points)
from halfspace.model import TrigSeries

from conftest import ATAN_C0, ATAN_C2, make_spec

ATAN = {"c": {"0": ATAN_C0, "2": ATAN_C2}}


def _values(e, pts):
    return ex.evaluate(e, pts) * np.ones(len(pts))


def test_affine_arithmetic():
    a = Affine(ex.const(2.0), Fraction(1, 2))
    b = Affine(ex.parse_expr("x1", 1), Fraction(-1, 3))
    s = (a + b).scale(6)
    assert s.coef == Fraction(1)
    assert ex.eval_expr(s.at(2.0), [1.0]) == pytest.approx(6 * 3 + 2)
    assert (a - a).coef == 0 and a.scale(0).coef == 0


def test_worked_example_substitutions():
    p = make_spec(ATAN)
    state = initial_state(p.source)
    eliminate_cos_chain(state, p.diffusion)
    a2, a0 = state.value("a2"), state.value("a0")
    assert a2.coef == Fraction(-1, 4) and a0.coef == Fraction(-3, 2)
    pts = np.linspace(-4, 4, 20).reshape(-1, 1)
    at2 = np.arctan(pts[:, 0]) ** 2
    for a1 in (0.0, 0.7, -1.3):
        assert np.max(np.abs(_values(a2.at(a1), pts) - (-at2 - a1 / 4))) <= 1e-10
        assert np.max(np.abs(_values(a0.at(a1), pts) - (2 * at2 - 1.5 * a1))) <= 1e-10


def test_worked_example_parameters_and_payload():
    out = eliminate(make_spec(ATAN))
    pr = out.parameters
    assert (pr.a1, pr.b1, pr.consistent) == (0.0, 0.0, True)
    pts = np.linspace(-4, 4, 33).reshape(-1, 1)
    at2 = np.arctan(pts[:, 0]) ** 2
    assert np.allclose(_values(pr.candidate.a(0), pts), 2 * at2, atol=1e-12)
    assert np.allclose(_values(pr.candidate.a(2), pts), -at2, atol=1e-12)
    assert out.rounds == 3            # k1 + 2 with k1 = 1


def test_constant_source_via_elimination():
    out = eliminate(make_spec({"c": {"0": "2"}}))
    assert out.parameters.a1 == -1.0 and out.rounds == 2
    assert ex.eval_expr(out.parameters.candidate.a(0), [0.0]) == pytest.approx(2.0)


def test_inconsistent_source_gets_certificate():
    pr = eliminate(make_spec({"c": {"0": "2*cos(2*x1)", "2": "sin(3*x1)"}})).parameters
    assert pr.consistent is False and pr.candidate is None
    w = pr.witness
    assert abs(w["value"]) > 10 * 1e-8 and len(w["point"]) == 1 and w["residual"]


def test_single_sine_mode_with_varying_amplitude_is_inconsistent():
    pr = eliminate(make_spec({"d": {"3": "1+x1^2"}})).parameters
    assert pr.consistent is False


def test_no_sine_modes_means_b1_zero():
    assert eliminate(make_spec(ATAN)).parameters.b1 == 0.0


@pytest.mark.parametrize("g", [
    {"c": {"0": "2/3", "2": "1"}},
    {"d": {"2": "0.5"}},
    {"c": {"0": "1", "3": "-2", "5": "0.25"}, "d": {"2": "0.5", "4": "-1"}},
])
def test_matches_one_dimensional_series(g):
    p = make_spec(g)
    out = eliminate(p)
    assert out.parameters.consistent
    ref = construct_series_1d(p.source)
    u = out.parameters.candidate
    for m in range(0, 6):
        assert ex.eval_expr(u.a(m), [0.3]) == pytest.approx(ex.eval_expr(ref.a(m), [0.3]), abs=1e-10)
        if m:
            assert ex.eval_expr(u.b(m), [0.3]) == pytest.approx(ex.eval_expr(ref.b(m), [0.3]), abs=1e-10)


def test_sample_points_stay_in_box():
    p = make_spec({"c": {"0": "2"}}, box=[[-2, 3]])
    pts = sample_points(p)
    assert pts.shape[1] == 1 and pts.min() >= -2 and pts.max() <= 3
    assert len(pts) > 10


def test_variable_diffusion_flag_for_two_variables():
    p = make_spec({"c": {"0": "2"}}, dim=3, A={"kind": "scalar_expr", "entry": "2+cos(x1)"},
                  passo_base=True, grid=17)
    out = eliminate(p)
    assert out.flags and out.parameters.consistent


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 3), st.floats(0, 3))
def test_linearity_of_outcomes(l1, l2):
    g1 = {"c": {"0": "2"}}
    g2 = {"c": {"0": "2/3", "2": "1"}}
    comb = {"c": {"0": f"{l1}*2 + {l2}*2/3", "2": f"{l2}"}}
    u1 = eliminate(make_spec(g1)).parameters.candidate
    u2 = eliminate(make_spec(g2)).parameters.candidate
    u = eliminate(make_spec(comb)).parameters.candidate
    for m in (0, 1, 2):
        want = l1 * ex.eval_expr(u1.a(m), [0.0]) + l2 * ex.eval_expr(u2.a(m), [0.0])
        assert ex.eval_expr(u.a(m), [0.0]) == pytest.approx(want, abs=1e-10)
