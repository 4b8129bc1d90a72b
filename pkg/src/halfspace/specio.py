"""Reading problem specs and writing reports.

Spec files are JSON documents validated against ``schemas/problem-spec.v1.json``.
Reports are serialised deterministically: keys keep their construction order,
floats are rounded to 12 significant digits, and non-finite values become the
strings "inf", "-inf" and "nan".
"""
from __future__ import annotations

import hashlib
import io
import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import jsonschema
import numpy as np

from . import expr as ex
from .model import DiffusionMatrix, ProblemSpec, Tolerances, TrigSeries, synth_grid

SCHEMA_VERSION = "1"


class SpecFormatError(ValueError):
    """The spec file is not valid JSON or does not match the schema."""


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("halfspace").joinpath("schemas", name).read_text(encoding="utf-8")
    return json.loads(text)


def _positive_number(value, where: str) -> float:
    if isinstance(value, str):
        try:
            v = ex.eval_expr(ex.parse_expr(value, 0), [])
        except ex.ParseError as err:
            raise SpecFormatError(f"{where}: {err}") from err
    else:
        v = float(value)
    if not (v > 0 and math.isfinite(v)):
        raise SpecFormatError(f"{where} must be positive, got {v!r}")
    return v


def _parse(text: str, n_vars: int, where: str) -> ex.Expr:
    try:
        return ex.parse_expr(text, n_vars)
    except ex.ParseError as err:
        raise SpecFormatError(f"{where}: {err}") from err


def _diffusion(doc: Optional[dict], n: int) -> DiffusionMatrix:
    if doc is None or doc["kind"] == "identity":
        return DiffusionMatrix.identity(n)
    if doc["kind"] == "scalar_expr":
        if "entry" not in doc:
            raise SpecFormatError("A.kind = scalar_expr needs an 'entry' expression")
        a = _parse(doc["entry"], n, "A.entry")
        rows = [[a if i == j else ex.ZERO for j in range(n)] for i in range(n)]
        return DiffusionMatrix.from_full(rows)
    entries = doc.get("entries")
    if entries is None or len(entries) != n or any(len(r) != n for r in entries):
        raise SpecFormatError(f"A.entries must be a {n}x{n} array of expressions")
    parsed = [[_parse(t, n, f"A.entries[{i}][{j}]") for j, t in enumerate(row)] for i, row in enumerate(entries)]
    try:
        return DiffusionMatrix.from_full(parsed, ex.grid_points(ex.grid_axes([(-3, 3)] * n, 9)))
    except ValueError as err:
        raise SpecFormatError(str(err)) from err


def series_from_dict(doc: dict, n: int) -> TrigSeries:
    cos = {int(m): _parse(t, n, f"g.c[{m}]") for m, t in doc.get("c", {}).items()}
    sin = {int(m): _parse(t, n, f"g.d[{m}]") for m, t in doc.get("d", {}).items()}
    if 0 in sin:
        raise SpecFormatError("g.d has no mode 0")
    aff = doc.get("affine_xn")
    return TrigSeries(n, cos, sin, None if aff is None else _parse(aff, n, "g.affine_xn"))


def spec_from_dict(doc: dict, overrides: Optional[dict] = None) -> ProblemSpec:
    """Build a ProblemSpec; ``overrides`` may set zero, residual, grid, periods, R, h, box."""
    try:
        jsonschema.validate(doc, load_schema("problem-spec.v1.json"))
    except jsonschema.ValidationError as err:
        loc = "/".join(str(x) for x in err.absolute_path) or "<root>"
        raise SpecFormatError(f"{loc}: {err.message}") from err
    o = dict(overrides or {})
    n = doc["dimension"] - 1
    tol = dict(doc.get("tolerances", {}))
    if o.get("zero") is not None:
        tol["zero"] = o["zero"]
    if o.get("residual") is not None:
        tol["residual"] = o["residual"]
    ver = doc.get("verification", {})
    orc = ver.get("oracle", {})
    kw: dict[str, Any] = {}
    if "box" in ver or o.get("box") is not None:
        kw["box"] = o.get("box") or ver["box"]
    for key, src in (("grid", "grid"), ("periods", "periods")):
        val = o.get(key) if o.get(key) is not None else ver.get(src)
        if val is not None:
            kw[key] = int(val)
    R = o.get("R") if o.get("R") is not None else orc.get("R")
    h = o.get("h") if o.get("h") is not None else orc.get("h")
    if R is not None:
        kw["oracle_R"] = _positive_number(R, "oracle R")
    if h is not None:
        kw["oracle_h"] = _positive_number(h, "oracle h")
    try:
        return ProblemSpec(
            dimension=doc["dimension"],
            diffusion=_diffusion(doc.get("A"), n),
            source=series_from_dict(doc["g"], n),
            tolerances=Tolerances(**tol),
            passo_base=bool(doc.get("passo_base", False)),
            **kw,
        )
    except ValueError as err:
        if isinstance(err, SpecFormatError):
            raise
        raise SpecFormatError(str(err)) from err


def load_spec(path: Union[str, Path], overrides: Optional[dict] = None) -> tuple[ProblemSpec, str]:
    """(spec, sha256 of the file bytes)."""
    raw = Path(path).read_bytes()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise SpecFormatError(f"{path}: not valid JSON ({err})") from err
    return spec_from_dict(doc, overrides), hashlib.sha256(raw).hexdigest()


# ---------------------------------------------------------------------------
# output

def clean(obj: Any) -> Any:
    """Recursively convert to plain JSON types with fixed float formatting."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        v = float(f"{v:.12g}")
        return 0.0 if v == 0 else v
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return clean(obj.to_dict())
    return str(obj)


def dumps(report: dict) -> str:
    return json.dumps(clean(report), indent=2, ensure_ascii=False) + "\n"


def report(command: str, digest: str, result: dict, config: Optional[dict] = None,
           backend: Optional[str] = None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "input_sha256": digest}
    if backend is not None:
        doc["backend"] = backend
    if config is not None:
        doc["config"] = config
    doc["result"] = result
    return clean(doc)


def validate_report(doc: dict) -> None:
    jsonschema.validate(doc, load_schema("report.v1.json"))


def field_csv(u: TrigSeries, p: ProblemSpec, resolution: Optional[int] = None) -> str:
    """Sampled field, header ``x1[,x2],xN,value``, row-major (x' slowest)."""
    res = resolution or (p.grid if p.n_vars == 1 else min(p.grid, 65))
    pts = p.xprime_points(res)
    xn = p.xn_grid(res)
    U = synth_grid(u, pts, xn)
    buf = io.StringIO()
    names = [f"x{i + 1}" for i in range(p.n_vars)]
    buf.write(",".join(names + ["xN", "value"]) + "\n")
    for i, x in enumerate(pts):
        head = ",".join(f"{v:.12g}" for v in x)
        for j, z in enumerate(xn):
            buf.write(f"{head},{z:.12g},{U[i, j]:.12g}\n")
    return buf.getvalue()


def read_field_csv(path: Union[str, Path]):
    """Parse a field dump into (xprime points (P, n), xn (Q,), values (P, Q))."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if len(header) < 3 or header[-2:] != ["xN", "value"] or \
                header[:-2] != [f"x{i + 1}" for i in range(len(header) - 2)]:
            raise SpecFormatError("field CSV header must be x1[,x2],xN,value")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    n = len(header) - 2
    xn = np.unique(data[:, n])
    Q = xn.size
    if data.shape[0] % Q:
        raise SpecFormatError("field CSV is not a full grid")
    P = data.shape[0] // Q
    values = data[:, n + 1].reshape(P, Q)
    pts = data[::Q, :n]
    if not np.allclose(data[:, n].reshape(P, Q), xn[None, :]):
        raise SpecFormatError("field CSV rows must be row-major with x_N fastest")
    return pts, xn, values
