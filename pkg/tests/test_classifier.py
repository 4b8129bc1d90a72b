import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halfspace import expr as ex
from halfspace.classifier import (CITATIONS, FAMILY, INCONCLUSIVE, NON_EXISTENCE, UNIQUE, SpecError, classify,
                                  construct_series_1d, family_nonnegative_range, nonnegativity_scan)
from halfspace.model import TrigSeries

from conftest import ATAN_C0, ATAN_C2, make_spec

PTS = np.array([[-3.0], [-0.4], [0.0], [1.7], [4.0]])


def coeffs(u, pts=PTS, M=6):
    out = []
    for m in range(M + 1):
        out.append(ex.evaluate(u.a(m), pts) * np.ones(len(pts)))
        if m:
            out.append(ex.evaluate(u.b(m), pts) * np.ones(len(pts)))
    return np.array(out)


def model_payload(theta=1.0):
    return TrigSeries.from_constants(1, {0: 2 * theta, 1: -theta})


@pytest.mark.parametrize("name, verdict, rule", [
    ("model", UNIQUE, "R-THETA-NONNEG"),
    ("model3", UNIQUE, "R-THETA-NONNEG"),
    ("model_div", UNIQUE, "R-THETA-NONNEG"),
    ("model3_div", UNIQUE, "R-THETA-NONNEG"),
    ("theta_neg", NON_EXISTENCE, "R-THETA-NEG"),
    ("g_xprime", NON_EXISTENCE, "R-G-XPRIME"),
    ("gsin", NON_EXISTENCE, "R-D1-POS"),
    ("gcos", NON_EXISTENCE, "R-C1-POS"),
    ("cos2", NON_EXISTENCE, "R-TEO10"),
    ("sin5", NON_EXISTENCE, "R-TEO10"),
    ("single_mode", NON_EXISTENCE, "R-TEO10"),
    ("maxprin", NON_EXISTENCE, "R-MAXPRIN"),
    ("series1d", UNIQUE, "R-SERIES-1D"),
    ("family_xn", FAMILY, "R-FAMILY-XN"),
    ("atan", UNIQUE, "R-ELIM"),
    ("elim_inconsistent", NON_EXISTENCE, "R-ELIM"),
    ("dim4", UNIQUE, "R-SERIES-1D"),
])
def test_golden_specs(spec_file, name, verdict, rule):
    c = classify(spec_file(name))
    assert (c.verdict, c.rule) == (verdict, rule)
    assert c.citation == CITATIONS[rule]
    if verdict == NON_EXISTENCE:
        assert c.obstructions, "a non-existence verdict needs a violated condition"
    if verdict == UNIQUE:
        assert c.evidence["verification"]["passed"]
    if verdict == INCONCLUSIVE:
        assert c.obstructions


def test_model_payload_is_one_minus_cos(spec_file):
    u = classify(spec_file("model")).payload
    assert u.to_text() == "1 - cos(xN)"
    assert np.array_equal(coeffs(u), coeffs(model_payload()))


def test_divergence_form_does_not_change_the_answer(spec_file):
    for plain, div in (("model", "model_div"), ("model3", "model3_div")):
        a, b = classify(spec_file(plain)), classify(spec_file(div))
        assert (a.verdict, a.rule, a.payload_text()) == (b.verdict, b.rule, b.payload_text())


def test_constant_theta_payload():
    c = classify(make_spec({"c": {"0": "5"}}))     # g = 5/2 in the c0/2 convention
    assert c.verdict == UNIQUE
    assert np.allclose(coeffs(c.payload), coeffs(model_payload(2.5)), atol=1e-15)


def test_theta_zero_gives_zero_solution():
    c = classify(make_spec({}))
    assert c.verdict == UNIQUE and c.rule == "R-THETA-NONNEG"
    assert np.all(coeffs(c.payload) == 0)


def test_series_payload_exact():
    c = classify(make_spec({"c": {"0": "2/3", "2": "1"}}))
    want = TrigSeries.from_constants(1, {0: 2 / 3, 1: 1 / 3 - 1 / 3, 2: -1 / 3})
    assert np.max(np.abs(coeffs(c.payload) - coeffs(want))) <= 1e-15


def test_sin2_candidate_is_negative():
    g = TrigSeries.from_constants(1, {}, {2: 1.0})
    u = construct_series_1d(g)
    assert ex.eval_expr(u.b(1), [0.0]) == pytest.approx(2 / 3)
    assert ex.eval_expr(u.b(2), [0.0]) == pytest.approx(-1 / 3)
    p = make_spec({"d": {"2": "1"}})
    assert nonnegativity_scan(u, p).rejected
    c = classify(p)
    assert c.verdict == NON_EXISTENCE and c.rule == "R-TEO10"


def test_series_construction_contract():
    with pytest.raises(ValueError):
        construct_series_1d(TrigSeries.from_constants(1, {1: 1.0}))
    with pytest.raises(ValueError):
        construct_series_1d(TrigSeries(1, {0: ex.parse_expr("x1", 1)}))


@settings(max_examples=25, deadline=None)
@given(st.dictionaries(st.integers(2, 6), st.floats(-3, 3, allow_nan=False), max_size=3),
       st.dictionaries(st.integers(2, 6), st.floats(-3, 3, allow_nan=False), max_size=3),
       st.floats(-3, 3))
def test_series_satisfies_boundary_identities(cos, sin, c0):
    u = construct_series_1d(TrigSeries.from_constants(1, {0: c0, **cos}, sin))
    from halfspace.model import series_derivative_xn, synth_grid
    ends = np.array([0.0, 2 * math.pi])
    pts = np.zeros((1, 1))
    assert np.max(np.abs(synth_grid(u, pts, ends))) <= 1e-12 * (1 + abs(c0) + 10)
    assert np.max(np.abs(synth_grid(series_derivative_xn(u, 1), pts, ends))) <= 1e-11 * 10


def test_family_for_affine_source(spec_file):
    c = classify(spec_file("family_xn"))
    fam = c.payload
    assert fam.parameter_range == (-1.0, 1.0)
    assert "completeness unknown" in fam.completeness
    d = c.to_dict()
    assert d["family"]["parameter_range"] == [-1.0, 1.0]
    assert any("open" in n for n in c.notes)


def test_family_nonnegative_range():
    lo, hi = family_nonnegative_range(make_spec({"affine_xn": "1"}))
    assert lo == pytest.approx(-1.0, abs=1e-6)
    assert hi == pytest.approx(4.6033, abs=1e-3)


def test_max_principle_example():
    c = classify(make_spec({"c": {"0": "-2", "1": "-1"}}))
    assert (c.verdict, c.rule) == (NON_EXISTENCE, "R-MAXPRIN")


def test_teo11_pattern():
    c = classify(make_spec({"c": {"2": "1"}, "d": {"3": "sin(x1)"}}))
    assert c.verdict in (NON_EXISTENCE, INCONCLUSIVE)
    assert c.verdict != UNIQUE


def test_high_dimension_needs_assertion(spec_file):
    p = make_spec({"c": {"0": "2"}}, dim=4, grid=33)
    c = classify(p)
    assert c.verdict == INCONCLUSIVE and c.obstructions
    c = classify(make_spec({"c": {"0": "2"}}, dim=4, passo_base=True, grid=33))
    assert c.verdict == UNIQUE and c.rule == "R-SERIES-1D"


def test_non_elliptic_diffusion_aborts():
    with pytest.raises(SpecError) as err:
        classify(make_spec({"c": {"0": "2"}}, A={"kind": "scalar_expr", "entry": "x1"}))
    assert err.value.findings and err.value.findings[0].kind == "ellipticity"


def test_borderline_trace_is_inconclusive():
    c = classify(make_spec({"c": {"0": "2"}, "d": {"1": "5e-9"}}))
    assert c.verdict == INCONCLUSIVE


def test_atan_payload():
    c = classify(make_spec({"c": {"0": ATAN_C0, "2": ATAN_C2}}))
    at2 = np.arctan(PTS[:, 0]) ** 2
    assert np.allclose(ex.evaluate(c.payload.a(0), PTS), 2 * at2, atol=1e-12)
    assert np.allclose(ex.evaluate(c.payload.a(2), PTS), -at2, atol=1e-12)


def test_classify_is_deterministic(spec_file):
    a = classify(spec_file("atan")).to_dict()
    b = classify(spec_file("atan")).to_dict()
    assert a["payload"] == b["payload"] and a["rule"] == b["rule"]


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 20), st.sampled_from([{"c": {"0": "2"}}, {"c": {"0": "2/3", "2": "1"}},
                                             {"c": {"0": "1", "3": "0.5"}, "d": {"2": "0.1"}}]))
def test_positive_scaling_scales_the_payload(lam, g):
    base = classify(make_spec(g))
    scaled_g = {k: {m: f"{lam!r}*({v})" for m, v in modes.items()} for k, modes in g.items()}
    scaled = classify(make_spec(scaled_g))
    assert scaled.verdict == base.verdict
    if base.verdict == UNIQUE:
        assert np.allclose(coeffs(scaled.payload), lam * coeffs(base.payload), atol=1e-12 * lam)


@settings(max_examples=10, deadline=None)
@given(st.floats(-5, -0.01))
def test_negative_constants_never_unique(theta):
    c = classify(make_spec({"c": {"0": repr(2 * theta)}}))
    assert c.verdict == NON_EXISTENCE and c.rule == "R-THETA-NEG"
