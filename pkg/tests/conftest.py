import math
from pathlib import Path

import pytest

from halfspace.specio import load_spec, spec_from_dict

ROOT = Path(__file__).resolve().parents[1]
SPECS = ROOT / "specs"
TWO_PI = 2 * math.pi

# source of the elimination worked example whose solution is atan(x1)^2 (1 - cos 2xN)
ATAN_C0 = "2*(2/(1+x1^2)^2 - 4*x1/(1+x1^2)^2*atan(x1) + atan(x1)^2)"
ATAN_C2 = "-2/(1+x1^2)^2 + 4*x1/(1+x1^2)^2*atan(x1) + 3*atan(x1)^2"


def make_spec(g, dim=2, A=None, passo_base=False, **verification):
    doc = {"schema_version": "1", "dimension": dim, "g": g}
    if A is not None:
        doc["A"] = A
    if verification:
        doc["verification"] = verification
    if passo_base:
        doc["passo_base"] = True
    return spec_from_dict(doc)


@pytest.fixture
def spec_file():
    def load(name):
        return load_spec(SPECS / f"{name}.json")[0]
    return load


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
