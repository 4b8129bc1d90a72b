"""Command-line front end.

    halfspace classify|solve|verify|audit|oracle SPEC.json [options]

Exit status: 0 when a verdict was produced (and any internal verification
passed), 2 for a NonExistence verdict or a failed audit, 1 for errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from . import expr as ex
from . import kernels
from .classifier import FAMILY, NON_EXISTENCE, UNIQUE, Classification, SpecError, classify
from .fourier import audit_table
from .model import ProblemSpec, TrigSeries, series_text
from .oracle import OracleResonance, oracle_convergence
from .specio import (SpecFormatError, dumps, field_csv, load_spec, read_field_csv, report,
                     validate_report, series_from_dict)
from .verifier import verify

log = logging.getLogger("halfspace")

COMMANDS = ("classify", "solve", "verify", "audit", "oracle")
EXIT_OK, EXIT_ERROR, EXIT_NONEXISTENCE = 0, 1, 2


class UsageError(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str
    input: Path
    out: Optional[Path] = None
    fmt: str = "json"
    overrides: dict = field(default_factory=dict)
    candidate: Optional[Path] = None
    field_csv: Optional[Path] = None
    csv_out: Optional[Path] = None
    modes: int = 8

    def __post_init__(self):
        for key in ("zero", "residual", "R", "h"):
            v = self.overrides.get(key)
            if v is not None and not v > 0:
                raise UsageError(f"--{key} must be positive")
        for key in ("grid", "periods"):
            v = self.overrides.get(key)
            if v is not None and v < (2 if key == "grid" else 1):
                raise UsageError(f"--{key} is too small")
        if self.modes < 1:
            raise UsageError("--modes must be at least 1")


# ---------------------------------------------------------------------------
# argument types

def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        try:
            v = ex.eval_expr(ex.parse_expr(text, 0), [])
        except ex.ParseError as err:
            raise argparse.ArgumentTypeError(f"not a number or constant expression: {text!r} ({err})")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _box(text: str) -> list:
    try:
        axes = [[float(v) for v in part.split(",")] for part in text.split(";")]
    except ValueError:
        raise argparse.ArgumentTypeError("box must look like 'lo,hi' or 'lo,hi;lo,hi'")
    if any(len(a) != 2 or a[0] >= a[1] for a in axes):
        raise argparse.ArgumentTypeError("each box axis needs lo < hi")
    return axes


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage, which would read as a NonExistence verdict."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="halfspace",
                                 description="Classify and verify -div(A grad u) = u - g on the half-space.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("spec", type=Path, help="problem spec (JSON)")
    ap.add_argument("--out", type=Path, help="write the report here instead of stdout")
    ap.add_argument("--format", dest="fmt", choices=("json", "csv", "text"), default="json")
    ap.add_argument("--tol-zero", type=_positive_float)
    ap.add_argument("--tol-res", type=_positive_float)
    ap.add_argument("--grid", type=int)
    ap.add_argument("--periods", type=int)
    ap.add_argument("--oracle-R", dest="oracle_R", type=_positive_float)
    ap.add_argument("--oracle-h", dest="oracle_h", type=_positive_float)
    ap.add_argument("--box", type=_box, help="verification box, e.g. --box=-4,4 or --box='-2,2;-2,2'")
    ap.add_argument("--candidate", type=Path,
                    help="verify/oracle: candidate series file with the same layout as the spec's g block")
    ap.add_argument("--field", type=Path, help="audit: sampled field CSV (x1[,x2],xN,value)")
    ap.add_argument("--modes", type=int, default=8, help="audit: highest mode to measure")
    ap.add_argument("--csv-out", type=Path, help="solve: also write the sampled payload as CSV")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command, input=ns.spec, out=ns.out, fmt=ns.fmt,
        overrides={"zero": ns.tol_zero, "residual": ns.tol_res, "grid": ns.grid, "periods": ns.periods,
                   "R": ns.oracle_R, "h": ns.oracle_h, "box": ns.box},
        candidate=ns.candidate, field_csv=ns.field, csv_out=ns.csv_out, modes=ns.modes,
    )


# ---------------------------------------------------------------------------
# commands

def _effective(p: ProblemSpec) -> dict:
    return {"dimension": p.dimension, "tol_zero": p.tolerances.zero, "tol_res": p.tolerances.residual,
            "box": [list(a) for a in p.box], "grid": p.grid, "periods": p.periods,
            "oracle_R": p.oracle_R, "oracle_h": p.oracle_h, "passo_base": p.passo_base}


def _coefficients(u: TrigSeries) -> dict:
    return {"cos": {str(m): ex.to_text(c) for m, c in u.cos.items()},
            "sin": {str(m): ex.to_text(c) for m, c in u.sin.items()},
            "affine_xn": None if u.affine is None else ex.to_text(u.affine)}


def _load_candidate(path: Path, p: ProblemSpec) -> TrigSeries:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise SpecFormatError(f"{path}: {err}") from err
    return series_from_dict(doc, p.n_vars)


def _candidate(cfg: RunConfig, p: ProblemSpec) -> tuple[TrigSeries, Optional[Classification]]:
    if cfg.candidate is not None:
        return _load_candidate(cfg.candidate, p), None
    c = classify(p)
    if c.verdict == UNIQUE:
        return c.payload, c
    if c.verdict == FAMILY:
        return c.payload.member(0.0), c
    raise UsageError(f"no candidate: classification is {c.verdict} ({c.rule}); pass --candidate")


def _text_classification(d: dict) -> str:
    lines = [f"verdict: {d['verdict']}", f"rule:    {d['rule']}", f"reason:  {d['citation']}"]
    if d.get("payload"):
        lines.append(f"payload: {d['payload']}")
    if "family" in d:
        lo, hi = d["family"]["parameter_range"]
        lines.append(f"family:  A in [{lo:g}, {hi:g}] ({d['family']['completeness']})")
    lines += [f"  - {o}" for o in d["obstructions"]]
    lines += [f"note: {n}" for n in d["notes"]]
    return "\n".join(lines) + "\n"


def run(cfg: RunConfig) -> int:
    p, digest = load_spec(cfg.input, cfg.overrides)
    config = _effective(p)
    csv_text: Optional[str] = None
    status = EXIT_OK

    if cfg.command in ("classify", "solve"):
        c = classify(p)
        result = c.to_dict()
        if c.verdict == NON_EXISTENCE:
            status = EXIT_NONEXISTENCE
        u = c.payload if c.verdict == UNIQUE else (c.payload.base if c.verdict == FAMILY else None)
        if cfg.command == "solve" and u is not None:
            result["coefficients"] = _coefficients(u)
            csv_text = field_csv(u, p)
        text = _text_classification(result)
    elif cfg.command == "verify":
        u, _ = _candidate(cfg, p)
        rep = verify(u, p, audit=True)
        result = rep.to_dict()
        result["candidate"] = series_text(u)
        status = EXIT_OK if rep.passed else EXIT_ERROR
        text = (f"candidate: {series_text(u)}\npassed: {rep.passed}\nresidual sup: {rep.residual_sup:.3e}\n"
                f"min: {rep.scan.minimum:.6g} at {list(rep.scan.witness)}\n")
    elif cfg.command == "audit":
        if cfg.field_csv is None:
            raise UsageError("audit needs --field FILE.csv")
        pts, xn, values = read_field_csv(cfg.field_csv)
        if pts.shape[1] != p.n_vars:
            raise UsageError(f"field has {pts.shape[1]} x' columns, spec has {p.n_vars}")
        rep = audit_table(pts, xn, values, cfg.modes, p.tolerances.zero)
        result = rep.to_dict()
        status = EXIT_OK if rep.passed else EXIT_NONEXISTENCE
        text = f"audit passed: {rep.passed}\n" + "".join(
            f"  b_{m}: {kind}\n" for m, kind in sorted(rep.dichotomy.items()))
    else:  # oracle
        u, _ = _candidate(cfg, p)
        conv = oracle_convergence(p, u)
        result = conv.to_dict()
        result["candidate"] = series_text(u)
        result["notes"] = ["boundary data comes from the candidate: a consistency check, not a uniqueness proof"]
        status = EXIT_OK if conv.passed else EXIT_ERROR
        text = (f"candidate: {series_text(u)}\ncoarse error {conv.coarse.sup_error:.3e} (h={conv.coarse.h:.4g})\n"
                f"fine error   {conv.fine.sup_error:.3e} (h={conv.fine.h:.4g})\n"
                f"ratio {conv.ratio:.3f}, passed: {conv.passed}\n")

    doc = report(cfg.command, digest, result, config, kernels.BACKEND)
    validate_report(doc)
    if cfg.fmt == "json":
        payload = dumps(doc)
    elif cfg.fmt == "text":
        payload = text
    else:
        if csv_text is None:
            raise UsageError("--format csv is only available for 'solve' with a Unique or Family verdict")
        payload = csv_text
    if cfg.csv_out is not None:
        if csv_text is None:
            raise UsageError("--csv-out needs 'solve' with a Unique or Family verdict")
        cfg.csv_out.write_text(csv_text, encoding="utf-8")
    if cfg.out is not None:
        cfg.out.write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return status


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("kernel backend: %s", kernels.BACKEND)
    try:
        cfg = config_from_args(ns)
        if not cfg.input.exists():
            raise UsageError(f"{cfg.input}: no such file")
        return run(cfg)
    except SpecError as err:
        for f in err.findings:
            print(f"error: spec validation ({f.kind}): {f.message}", file=sys.stderr)
        return EXIT_ERROR
    except ex.ParseError as err:
        print(f"error: {err} (offset {err.offset})", file=sys.stderr)
        return EXIT_ERROR
    except BrokenPipeError:
        # downstream reader (e.g. head) closed early; not an error of ours
        sys.stdout = None
        return EXIT_OK
    except (ValueError, UsageError, OracleResonance, ex.EvaluationError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
