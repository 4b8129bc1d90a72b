import json
import subprocess
import sys

import jsonschema
import pytest

from halfspace.cli import EXIT_ERROR, EXIT_NONEXISTENCE, EXIT_OK, main
from halfspace.specio import load_schema, read_field_csv

from conftest import SPECS

GOLDEN = SPECS / "golden"
GOLDEN_NAMES = sorted(p.name.split(".")[0] for p in GOLDEN.glob("*.classify.json"))
STABLE_KEYS = ("verdict", "rule", "citation", "payload", "obstructions")


def run(*args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def test_golden_directory_is_populated():
    assert len(GOLDEN_NAMES) >= 10


@pytest.mark.parametrize("name", GOLDEN_NAMES)
def test_classify_matches_golden(name, capsys):
    code, out, _ = run("classify", SPECS / f"{name}.json", capsys=capsys)
    doc = json.loads(out)
    want = json.loads((GOLDEN / f"{name}.classify.json").read_text())
    jsonschema.validate(doc, load_schema("report.v1.json"))
    assert doc["input_sha256"] == want["input_sha256"]
    for key in STABLE_KEYS:
        assert doc["result"][key] == want["result"][key], key
    assert code == (EXIT_NONEXISTENCE if want["result"]["verdict"] == "NonExistence" else EXIT_OK)


def test_json_output_is_deterministic(capsys):
    _, a, _ = run("classify", SPECS / "atan.json", capsys=capsys)
    _, b, _ = run("classify", SPECS / "atan.json", capsys=capsys)
    assert a == b


def test_text_format(capsys):
    code, out, _ = run("classify", SPECS / "model.json", "--format", "text", capsys=capsys)
    assert code == EXIT_OK
    assert "verdict: Unique" in out and "payload: 1 - cos(xN)" in out


def test_solve_writes_coefficients_and_csv(tmp_path, capsys):
    csv = tmp_path / "u.csv"
    code, out, _ = run("solve", SPECS / "series1d.json", "--csv-out", csv, capsys=capsys)
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["result"]["coefficients"]["cos"]["2"] == "-0.3333333333333333"
    pts, xn, values = read_field_csv(csv)
    assert pts.shape == (257, 1) and xn.size == 257 and values.min() >= -1e-12


def test_solve_csv_format_needs_a_payload(capsys):
    code, _, err = run("solve", SPECS / "gsin.json", "--format", "csv", capsys=capsys)
    assert code == EXIT_ERROR and "csv" in err


def test_verify_and_audit_round_trip(tmp_path, capsys):
    code, out, _ = run("verify", SPECS / "model.json", capsys=capsys)
    assert code == EXIT_OK and json.loads(out)["result"]["passed"] is True
    csv = tmp_path / "f.csv"
    run("solve", SPECS / "model.json", "--grid", "65", "--csv-out", csv, capsys=capsys)
    code, out, _ = run("audit", SPECS / "model.json", "--field", csv, "--modes", "4", capsys=capsys)
    assert code == EXIT_OK and json.loads(out)["result"]["passed"] is True


def test_audit_flags_positive_sine_modes(tmp_path, capsys):
    cand = tmp_path / "c.json"
    cand.write_text(json.dumps({"c": {"0": "2", "1": "-1"}, "d": {"2": "0.5"}}))
    code, out, _ = run("verify", SPECS / "model.json", "--candidate", cand, capsys=capsys)
    assert code == EXIT_ERROR
    rep = json.loads(out)["result"]
    assert rep["passed"] is False and rep["coefficient_audit"]["check_i_nonpositive"] is False


def test_oracle_command(capsys):
    code, out, _ = run("oracle", SPECS / "model.json", capsys=capsys)
    doc = json.loads(out)["result"]
    assert code == EXIT_OK and 3.2 <= doc["ratio"] <= 4.8


def test_oracle_without_candidate(capsys):
    code, _, err = run("oracle", SPECS / "gsin.json", capsys=capsys)
    assert code == EXIT_ERROR and "no candidate" in err


def test_overrides_reach_the_report(capsys):
    _, out, _ = run("classify", SPECS / "model.json", "--tol-zero", "1e-7", "--grid", "33", "--periods", "3",
                    "--box=-2,2", "--oracle-h", "2*pi/64", capsys=capsys)
    cfg = json.loads(out)["config"]
    assert (cfg["tol_zero"], cfg["grid"], cfg["periods"], cfg["box"]) == (1e-7, 33, 3, [[-2.0, 2.0]])
    assert cfg["oracle_h"] == pytest.approx(0.0981747704247)


@pytest.mark.parametrize("args, needle", [
    (["--grid", "1"], "--grid"),
    (["--modes", "0"], "--modes"),
])
def test_bad_overrides(args, needle, capsys):
    code, _, err = run("classify", SPECS / "model.json", *args, capsys=capsys)
    assert code == EXIT_ERROR and needle in err


def test_bad_expression_reports_offset(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": "1", "dimension": 2, "g": {"c": {"0": "1 + * x1"}}}))
    code, _, err = run("classify", bad, capsys=capsys)
    assert code == EXIT_ERROR and "byte" in err


def test_non_elliptic_diffusion(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": "1", "dimension": 2, "g": {"c": {"0": "2"}},
                               "A": {"kind": "scalar_expr", "entry": "x1"}}))
    code, _, err = run("classify", bad, capsys=capsys)
    assert code == EXIT_ERROR and "ellipticity" in err


def test_schema_violation(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": "1", "dimension": 1, "g": {}}))
    code, _, err = run("classify", bad, capsys=capsys)
    assert code == EXIT_ERROR and "dimension" in err


def test_missing_file(tmp_path, capsys):
    code, _, err = run("classify", tmp_path / "nope.json", capsys=capsys)
    assert code == EXIT_ERROR and "no such file" in err


def test_console_entry_point_and_exit_codes(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "halfspace.cli", "classify", str(SPECS / "theta_neg.json"),
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == EXIT_NONEXISTENCE
    assert json.loads(out.read_text())["result"]["rule"] == "R-THETA-NEG"
    proc = subprocess.run([sys.executable, "-m", "halfspace.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("halfspace")


def test_usage_errors_do_not_look_like_nonexistence(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["classify", str(SPECS / "model.json"), "--format", "yaml"])
    assert exc.value.code == EXIT_ERROR
