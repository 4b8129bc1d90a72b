import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from halfspace import _fallback, kernels

try:
    from halfspace import _kernels
except ImportError:      # extension not built: only the fallback is exercised
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


def _matrix(trip):
    rows, cols, vals, rhs = trip
    return sp.csr_matrix((vals, (rows, cols)), shape=(rhs.size, rhs.size)), rhs


def test_fallback_synth_reduce_matches_dense():
    rng = np.random.default_rng(1)
    C, B = rng.normal(size=(37, 5)), rng.normal(size=(5, 11))
    U = C @ B
    vmin, pmin, qmin, vmax, pmax, qmax, vabs = _fallback.synth_reduce(C, B)
    assert vmin == U.min() and U[pmin, qmin] == vmin
    assert vmax == U.max() and U[pmax, qmax] == vmax
    assert vabs == np.abs(U).max()


def test_fallback_laplacian_stencil():
    # constant coefficient: -u_xx - u_zz - u on a 4x4 interior
    n = 5
    a = np.ones(n)
    ub = np.zeros((n + 1, n + 1))
    f = np.zeros((n - 1) ** 2)
    M, rhs = _matrix(_fallback.assemble_2d(a, 1.0, 1.0, ub, f))
    d = M.diagonal()
    assert np.allclose(d, 4.0 - 1.0)
    assert np.allclose(M.toarray(), M.toarray().T)
    assert np.all(rhs == 0)


@needs_ext
@settings(max_examples=20, deadline=None)
@given(st.integers(1, 300), st.integers(1, 9), st.integers(2, 200), st.integers(0, 2 ** 31))
def test_synth_reduce_backends_agree(P, M, Q, seed):
    rng = np.random.default_rng(seed)
    C, B = rng.normal(size=(P, M)), rng.normal(size=(M, Q))
    a, b = _fallback.synth_reduce(C, B), _kernels.synth_reduce(C, B)
    assert np.allclose([a[0], a[3], a[6]], [b[0], b[3], b[6]], rtol=1e-12, atol=1e-12)
    U = C @ B
    assert math.isclose(U[b[1], b[2]], a[0], rel_tol=1e-12, abs_tol=1e-12)


@needs_ext
def test_project_backends_agree():
    rng = np.random.default_rng(3)
    V, w = rng.normal(size=(101, 65)), rng.normal(size=65)
    assert np.allclose(_fallback.project(V, w), _kernels.project(V, w), rtol=1e-12, atol=1e-12)


@needs_ext
def test_assemblers_agree():
    rng = np.random.default_rng(4)
    n = 12
    args2 = (1 + rng.random(n), 0.3, 0.4, rng.normal(size=(n + 1, n + 1)), rng.normal(size=(n - 1) ** 2))
    Ma, ra = _matrix(_fallback.assemble_2d(*args2))
    Mb, rb = _matrix(_kernels.assemble_2d(*args2))
    assert abs(Ma - Mb).max() <= 1e-12 and np.allclose(ra, rb)
    m = 6
    args3 = (1 + rng.random((m, m + 1)), 1 + rng.random((m + 1, m)), 0.1 * rng.random((m + 1, m + 1)),
             0.5, 0.5, 0.7, rng.normal(size=(m + 1,) * 3), rng.normal(size=(m - 1) ** 3))
    Ma, ra = _matrix(_fallback.assemble_3d(*args3))
    Mb, rb = _matrix(_kernels.assemble_3d(*args3))
    assert abs(Ma - Mb).max() <= 1e-12 and np.allclose(ra, rb)


def test_backend_override_by_environment():
    env = dict(os.environ, HALFSPACE_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from halfspace import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backend_name():
    assert kernels.BACKEND in ("python", "cython")
    if _kernels is not None and os.environ.get("HALFSPACE_BACKEND", "") != "python":
        assert kernels.BACKEND == "cython"


def test_benchmark_script_runs(tmp_path):
    from conftest import ROOT
    out = tmp_path / "bench.json"
    proc = subprocess.run([sys.executable, str(ROOT / "benchmarks" / "bench_kernels.py"), "--size", "small",
                           "--repeat", "1", "--json", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    rows = json.loads(out.read_text())["rows"]
    assert {r["kernel"] for r in rows} == {"synth_reduce", "project", "assemble_2d", "assemble_3d"}
