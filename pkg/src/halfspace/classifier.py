"""Decision tree mapping a problem spec to a verdict with evidence.

Order of the checks: spec validation, constant source, source depending on x'
only, trace discharge from the signs of d1 and c1 (plus the maximum-principle
rule), the 1-D series candidate, the single-mode patterns, elimination, the
affine family, and finally Inconclusive.  Every Unique payload is re-verified
before it is returned; a payload that fails verification downgrades the
verdict to Inconclusive instead of being reported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from . import expr as ex
from .coefficients import build_system, discharge_traces, source_coefficient
from .elimination import eliminate
from .fourier import coefficient_audit, series_sampler
from .model import FamilySolution, Finding, ProblemSpec, TrigSeries, synth_grid, validate_spec
from .verifier import ScanResult, nonnegativity_scan, residual, verify

TWO_PI = 2.0 * math.pi

NON_EXISTENCE = "NonExistence"
UNIQUE = "Unique"
FAMILY = "Family"
INCONCLUSIVE = "Inconclusive"

# Rule vocabulary: part of the versioned output contract.
CITATIONS = {
    "R-THETA-NONNEG": "constant source theta >= 0 (N = 2, 3): the unique solution is theta(1 - cos x_N)",
    "R-THETA-NEG": "constant source theta < 0 (N = 2, 3): no nonnegative solution",
    "R-G-XPRIME": "source depending on x' only (N = 2, 3): a solution exists only if the source is constant",
    "R-D1-POS": "d1 >= 0 and not identically zero (N = 2, 3): no solution",
    "R-C1-POS": "d1 = 0, c1 >= 0 and not identically zero (N = 2, 3): no solution",
    "R-MAXPRIN": "source <= 0, non-constant, with d1 >= 0 (N = 2, 3): a solution would be positive, "
                 "contradicting u(., 2pi) = 0",
    "R-SERIES-1D": "source in x_N only with c1 = d1 = 0: the solution, if any, is the explicit 1-D series",
    "R-TEO10": "single-mode source f(x') cos(m x_N) or f(x') sin(m x_N), m >= 2, f not zero (N = 2, 3): no solution",
    "R-TEO11": "source with exactly one non-constant sine (or cosine) mode and the rest of the other kind "
               "(N = 2, 3): no solution",
    "R-ELIM": "finite-mode source with c1 = d1 = 0: elimination determines the only possible solution",
    "R-FAMILY-XN": "source kappa x_N, kappa > 0: u_A = kappa (x_N + A sin x_N) for A in [-1, 1]",
    "R-INCONCLUSIVE": "no rule applies with the available evidence",
}

KNOWN_FAMILY_RANGE = (-1.0, 1.0)


class SpecError(ValueError):
    """Fatal validation findings; classification is not attempted."""

    def __init__(self, findings: list):
        self.findings = findings
        super().__init__("; ".join(f.message for f in findings if f.fatal))


@dataclass
class Classification:
    verdict: str
    rule: str
    payload: Union[TrigSeries, FamilySolution, list, None] = None
    evidence: dict = field(default_factory=dict)
    obstructions: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def citation(self) -> str:
        return CITATIONS.get(self.rule, "")

    def payload_text(self) -> Optional[str]:
        if isinstance(self.payload, TrigSeries):
            return self.payload.to_text()
        if isinstance(self.payload, FamilySolution):
            return f"{self.payload.base.to_text()} + A*({self.payload.direction.to_text()})"
        return None

    def to_dict(self) -> dict:
        d = {
            "verdict": self.verdict,
            "rule": self.rule,
            "citation": self.citation,
            "payload": self.payload_text(),
            "evidence": self.evidence,
            "obstructions": [o if isinstance(o, str) else str(o) for o in self.obstructions],
            "notes": list(self.notes),
        }
        if isinstance(self.payload, FamilySolution):
            d["family"] = {
                "parameter_range": list(self.payload.parameter_range),
                "completeness": self.payload.completeness,
            }
        return d


# ---------------------------------------------------------------------------
# helpers

def _profile_res(p: ProblemSpec) -> int:
    return min(p.grid, 129) if p.n_vars == 1 else min(p.grid, 33)


def _flat_value(e: ex.Expr, p: ProblemSpec) -> Optional[float]:
    """The constant value of e if it is (numerically) constant on the box."""
    if ex.is_constant_node(e):
        return ex.eval_expr(e, np.zeros(p.n_vars))
    prof = ex.sample_expr(e, p.box, _profile_res(p))
    if prof.maximum - prof.minimum <= p.tolerances.zero:
        return 0.5 * (prof.maximum + prof.minimum)
    return None


def numeric_constants(g: TrigSeries, p: ProblemSpec) -> Optional[TrigSeries]:
    """g with every coefficient replaced by its constant value, or None if some depends on x'."""
    cos, sin = {}, {}
    for m, c in g.cos.items():
        v = _flat_value(c, p)
        if v is None:
            return None
        cos[m] = v
    for m, c in g.sin.items():
        v = _flat_value(c, p)
        if v is None:
            return None
        sin[m] = v
    aff = None
    if g.affine is not None:
        aff = _flat_value(g.affine, p)
        if aff is None:
            return None
    return TrigSeries.from_constants(g.n_vars, cos, sin, aff)


def _negligible(v: float, tol: float) -> bool:
    return abs(v) <= tol


def construct_series_1d(g: TrigSeries, tol: float = 0.0) -> TrigSeries:
    """The unique candidate for a source in x_N only with c1 = d1 = 0.

    a0 = c0, a1 = -c0/2 + sum c_m/(m^2-1), b1 = sum m d_m/(m^2-1),
    a_m = -c_m/(m^2-1), b_m = -d_m/(m^2-1) for m >= 2.
    """
    if g.affine is not None:
        raise ValueError("the 1-D series needs a periodic source")
    if not g.xprime_constant():
        raise ValueError("the 1-D series needs constant coefficients")
    val = {("cos", m): ex.eval_expr(c, np.zeros(g.n_vars)) for m, c in g.cos.items()}
    val.update({("sin", m): ex.eval_expr(c, np.zeros(g.n_vars)) for m, c in g.sin.items()})
    if not _negligible(val.get(("cos", 1), 0.0), tol) or not _negligible(val.get(("sin", 1), 0.0), tol):
        raise ValueError("the 1-D series requires c1 = d1 = 0")
    c0 = val.get(("cos", 0), 0.0)
    cos = {0: c0}
    sin = {}
    a1 = -c0 / 2.0
    b1 = 0.0
    for (kind, m), v in sorted(val.items()):
        if m < 2 or v == 0.0:
            continue
        lam = float(m * m - 1)
        if kind == "cos":
            cos[m] = -v / lam
            a1 += v / lam
        else:
            sin[m] = -v / lam
            b1 += m * v / lam
    cos[1] = a1
    sin[1] = b1
    return TrigSeries.from_constants(g.n_vars, cos, sin)


def family_nonnegative_range(p: ProblemSpec, samples: int = 20001) -> tuple[float, float]:
    """Widest [lo, hi] with x_N + A sin x_N >= 0 on K periods (dense scan, then polished)."""
    x = np.linspace(0.0, TWO_PI * p.periods, samples)[1:]
    s = np.sin(x)
    pos, neg = s > 1e-12, s < -1e-12
    lo = float(np.max(-x[pos] / s[pos])) if pos.any() else -math.inf
    hi = float(np.min(x[neg] / -s[neg])) if neg.any() else math.inf
    if neg.any():
        k = int(np.argmin(np.where(neg, x / np.where(neg, -s, 1.0), np.inf)))
        step = x[1] - x[0]
        r = minimize_scalar(lambda t: t / -math.sin(t), bounds=(x[k] - step, x[k] + step),
                            method="bounded", options={"xatol": 1e-12})
        hi = min(hi, float(r.fun))
    return lo, hi


def _growth_probe(u: TrigSeries, p: ProblemSpec) -> Optional[str]:
    """Flag candidates whose coefficients grow markedly outside the box."""
    modes = u.basis_modes()
    if not modes or u.xprime_constant():
        return None
    res = _profile_res(p)
    base = np.abs(u.coefficient_matrix(p.xprime_points(res), modes)).max()
    big_box = [(8 * lo, 8 * hi) for lo, hi in p.box]
    try:
        big = np.abs(u.coefficient_matrix(ex.grid_points(ex.grid_axes(big_box, res)), modes)).max()
    except ex.EvaluationError as err:
        return f"candidate cannot be evaluated on the enlarged box: {err}"
    if big > 10.0 * max(base, 1.0):
        return (f"candidate coefficients grow from {base:.3g} on the box to {big:.3g} on the 8x box: "
                "not bounded on strips")
    return None


def _scan_evidence(scan: ScanResult) -> dict:
    return {"nonnegativity": scan.to_dict(), "evidence_level": "grid scan"}


def _single_mode(g: TrigSeries):
    """(kind, m, coeff) when g has exactly one mode and no affine part."""
    modes = g.modes()
    if g.affine is None and len(modes) == 1:
        return modes[0]
    return None


def _is_teo10(g: TrigSeries) -> bool:
    one = _single_mode(g)
    return one is not None and one[1] >= 2


# ---------------------------------------------------------------------------
# final checks for a Unique candidate

def _accept(u: TrigSeries, p: ProblemSpec, rule: str, evidence: dict, notes: list) -> Classification:
    growth = _growth_probe(u, p)
    if growth:
        return Classification(INCONCLUSIVE, rule, None, evidence, [growth], notes)
    report = verify(u, p, audit=True)
    evidence = dict(evidence)
    evidence["verification"] = report.to_dict()
    if not report.passed:
        return Classification(INCONCLUSIVE, rule, None, evidence,
                              ["candidate failed internal verification"], notes)
    return Classification(UNIQUE, rule, u, evidence, [], notes)


# ---------------------------------------------------------------------------
# classify

def classify(p: ProblemSpec) -> Classification:
    findings = validate_spec(p)
    fatal = [f for f in findings if f.fatal]
    if fatal:
        raise SpecError(fatal)
    notes = [f.message for f in findings]
    tol = p.tolerances.zero
    g = p.source
    low = p.dimension in (2, 3)

    if not low and not p.passo_base:
        return _high_dimension(p, notes)

    consts = numeric_constants(g, p)

    # constant source
    if low and consts is not None and consts.affine is None and not consts.sin \
            and set(consts.cos) <= {0}:
        theta = 0.5 * ex.eval_expr(consts.a(0), np.zeros(p.n_vars))
        ev = {"theta": theta}
        if theta < -tol:
            return Classification(NON_EXISTENCE, "R-THETA-NEG", None, ev,
                                  [f"theta = {theta:.12g} < 0"], notes)
        theta = max(theta, 0.0)
        u = TrigSeries.from_constants(p.n_vars, {0: 2.0 * theta, 1: -theta})
        return _accept(u, p, "R-THETA-NONNEG", ev, notes)

    # source depending on x' only
    if low and g.affine is None and not g.sin and set(g.cos) <= {0}:
        prof = ex.sample_expr(g.a(0), p.box, _profile_res(p))
        ev = {"c0_profile": prof.to_dict()}
        return Classification(NON_EXISTENCE, "R-G-XPRIME", None, ev,
                              [f"source varies over x': c0/2 ranges in [{prof.minimum / 2:.6g}, "
                               f"{prof.maximum / 2:.6g}]"], notes)

    system = build_system(p)
    dis = discharge_traces(system, p)
    evidence: dict = {"signs": {k: v.to_dict() for k, v in dis.evidence.items()},
                      "traces": dis.traces.to_dict()}
    if dis.nonexistence:
        ev = dis.evidence["d1" if dis.nonexistence == "R-D1-POS" else "c1"]
        return Classification(NON_EXISTENCE, dis.nonexistence, None, evidence,
                              [f"{ev.name} >= 0 on the sample (min {ev.minimum:.6g}, max {ev.maximum:.6g}) "
                               f"and not identically zero ({ev.level})"], notes)

    if low:
        mp = _max_principle(p, dis)
        if mp is not None:
            evidence["source_profile"] = mp
            return Classification(NON_EXISTENCE, "R-MAXPRIN", None, evidence,
                                  [f"source <= 0 and non-constant (max {mp['max']:.6g}, min {mp['min']:.6g}); "
                                   "d1 >= 0"], notes)

    if not dis.traces.all_zero:
        fam = _family(p, consts, evidence, notes, dis.obstructions)
        if fam is not None:
            return fam
        return Classification(INCONCLUSIVE, "R-INCONCLUSIVE", list(dis.obstructions), evidence,
                              list(dis.obstructions), notes)

    if not low:
        notes = notes + [f"dimension {p.dimension}: traces asserted by the caller"]

    # 1-D series
    if consts is not None and consts.affine is None:
        u = construct_series_1d(consts, tol)
        scan = nonnegativity_scan(u, p)
        evidence.update(_scan_evidence(scan))
        evidence["candidate"] = u.to_text()
        if scan.rejected:
            rule = "R-TEO10" if (low and _is_teo10(consts)) else "R-SERIES-1D"
            obs = [f"the only possible solution {u.to_text()} takes the value {scan.minimum:.6g} "
                   f"at {list(scan.witness)}"]
            if rule == "R-TEO10":
                obs.append("single-mode source with constant amplitude: decided by the sign of the 1-D candidate")
            return Classification(NON_EXISTENCE, rule, None, evidence, obs, notes)
        return _accept(u, p, "R-SERIES-1D", evidence, notes)

    if low:
        one = _single_mode(g)
        if one is not None and one[1] >= 2:
            kind, m, f = one
            prof = ex.sample_expr(f, p.box, _profile_res(p))
            evidence["f_profile"] = prof.to_dict()
            return Classification(NON_EXISTENCE, "R-TEO10", None, evidence,
                                  [f"g = f(x') {kind}({m} x_N) with f non-constant: f ranges in "
                                   f"[{prof.minimum:.6g}, {prof.maximum:.6g}]"], notes)
        t11 = _teo11(g, p)
        if t11 is not None:
            evidence["pattern"] = t11
            return Classification(NON_EXISTENCE, "R-TEO11", None, evidence, [t11], notes)

    if g.affine is None:
        return _by_elimination(p, evidence, notes)

    fam = _family(p, consts, evidence, notes, [])
    if fam is not None:
        return fam
    return Classification(INCONCLUSIVE, "R-INCONCLUSIVE", ["source outside the supported finite-mode form"],
                          evidence, ["source outside the supported finite-mode form"], notes)


def _max_principle(p: ProblemSpec, dis) -> Optional[dict]:
    d1 = dis.evidence["d1"].classify(p.tolerances.zero)
    if d1 not in ("zero", "nonneg"):
        return None
    pts = p.xprime_points(_profile_res(p))
    xn = np.linspace(0.0, TWO_PI * (p.periods if p.source.affine is not None else 1), 257)
    G = synth_grid(p.source, pts, xn)
    gmax, gmin = float(G.max()), float(G.min())
    if gmax <= p.tolerances.zero and gmax - gmin > p.tolerances.zero:
        return {"max": gmax, "min": gmin}
    return None


def _teo11(g: TrigSeries, p: ProblemSpec) -> Optional[str]:
    if g.affine is not None:
        return None
    nonconst = lambda e: _flat_value(e, p) is None  # noqa: E731
    sin_modes = [(n, d) for n, d in g.sin.items() if n >= 2]
    cos_modes = [(m, c) for m, c in g.cos.items() if m != 1]
    if len(sin_modes) == 1 and nonconst(sin_modes[0][1]) and set(g.sin) == {sin_modes[0][0]}:
        return f"exactly one sine mode (n = {sin_modes[0][0]}) with non-constant coefficient"
    if len(cos_modes) == 1 and nonconst(cos_modes[0][1]) and set(g.cos) == {cos_modes[0][0]}:
        return f"exactly one cosine mode (m = {cos_modes[0][0]}) with non-constant coefficient"
    return None


def _family(p: ProblemSpec, consts: Optional[TrigSeries], evidence: dict, notes: list,
            obstructions: list) -> Optional[Classification]:
    g = p.source
    if consts is None or consts.affine is None or consts.cos or consts.sin:
        return None
    kappa = ex.eval_expr(consts.affine, np.zeros(p.n_vars))
    if kappa <= p.tolerances.zero:
        return None
    n = p.n_vars
    base = TrigSeries(n, {}, {}, ex.const(kappa))
    direction = TrigSeries.from_constants(n, {}, {1: kappa})
    fam = FamilySolution(base, direction, KNOWN_FAMILY_RANGE)
    lo, hi = family_nonnegative_range(p)
    checks = {}
    for A in (-1.0, 0.0, 1.0):
        _, sup = residual(fam.member(A), p)
        checks[f"{A:g}"] = {"residual_sup": sup, "min": nonnegativity_scan(fam.member(A), p).minimum}
    ev = dict(evidence)
    ev["members"] = checks
    ev["sampled_nonnegative_range"] = [lo, hi]
    open_q = (f"known family range [-1, 1]; members with A in [{lo:.6g}, {hi:.6g}] are nonnegative on the "
              "sampled strip and also solve the equation; whether further solutions exist is open")
    bad = [k for k, v in checks.items() if v["residual_sup"] > p.tolerances.residual]
    if bad:
        return Classification(INCONCLUSIVE, "R-FAMILY-XN", None, ev,
                              [f"family member A={k} failed the residual check" for k in bad], notes)
    return Classification(FAMILY, "R-FAMILY-XN", fam, ev, [], notes + [str(o) for o in obstructions] + [open_q])


def _by_elimination(p: ProblemSpec, evidence: dict, notes: list) -> Classification:
    out = eliminate(p)
    evidence = dict(evidence)
    evidence["elimination"] = out.to_dict()
    notes = notes + list(out.flags)
    par = out.parameters
    if par.consistent is False:
        w = par.witness or {}
        return Classification(NON_EXISTENCE, "R-ELIM", None, evidence,
                              [f"equation {w.get('equation')} has residual {w.get('value', float('nan')):.6g} "
                               f"at x'={w.get('point')} with the least-squares parameters a1={par.a1:.6g}, b1={par.b1:.6g}"],
                              notes)
    if par.consistent is None or par.free:
        why = [f"parameter(s) {', '.join(par.free)} not determined: possible family"] if par.free else \
            [f"residual {par.max_residual:.3g} is between tol_res and 10*tol_res: undecided"]
        return Classification(INCONCLUSIVE, "R-ELIM", None, evidence, why, notes)
    u = par.candidate
    scan = nonnegativity_scan(u, p)
    evidence.update(_scan_evidence(scan))
    evidence["candidate"] = u.to_text()
    if scan.rejected:
        return Classification(NON_EXISTENCE, "R-ELIM", None, evidence,
                              [f"the only possible solution takes the value {scan.minimum:.6g} at "
                               f"{list(scan.witness)}"], notes)
    return _accept(u, p, "R-ELIM", evidence, notes)


def _high_dimension(p: ProblemSpec, notes: list) -> Classification:
    obs = [f"dimension {p.dimension}: the traces cannot be discharged without an explicit assertion "
           "(set passo_base to assert u(.,2pi) = 0 and u_N(.,0) = 0)"]
    evidence: dict = {}
    consts = numeric_constants(p.source, p)
    c1 = source_coefficient(p.source, "cos", 1)
    d1 = source_coefficient(p.source, "sin", 1)
    zero_first = all(_flat_value(e, p) is not None and abs(_flat_value(e, p)) <= p.tolerances.zero
                     for e in (c1, d1))
    if consts is not None and consts.affine is None and zero_first:
        u = construct_series_1d(consts, p.tolerances.zero)
        evidence["candidate_if_traces_vanish"] = u.to_text()
        evidence.update(_scan_evidence(nonnegativity_scan(u, p)))
        pts = p.xprime_points(5)
        evidence["coefficient_audit"] = coefficient_audit(
            series_sampler(u), max(u.max_mode, 2), pts, p.tolerances.zero).to_dict()
    return Classification(INCONCLUSIVE, "R-INCONCLUSIVE", obs, evidence, obs, notes)
