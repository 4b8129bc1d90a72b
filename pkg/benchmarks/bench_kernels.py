"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size medium] [--json out.json]

Each kernel is run on identical inputs by both backends; the outputs are
compared before any timing is reported.
"""
import argparse
import json
import math
import sys
import timeit

import numpy as np
import scipy.sparse as sp

from halfspace import _fallback

try:
    from halfspace import _kernels
except ImportError:
    _kernels = None

SIZES = {
    # (x' points, x_N points, modes) for synth_reduce/project; mesh n for the assemblers
    "small": dict(P=1_000, Q=129, M=9, n2=64, n3=16),
    "medium": dict(P=4_225, Q=257, M=17, n2=128, n3=32),
    "large": dict(P=16_641, Q=513, M=33, n2=256, n3=48),
}


def make_inputs(size):
    rng = np.random.default_rng(0)
    s = SIZES[size]
    C = rng.normal(size=(s["P"], s["M"]))
    B = rng.normal(size=(s["M"], s["Q"]))
    V = rng.normal(size=(s["P"], s["Q"]))
    w = rng.normal(size=s["Q"])

    n = s["n2"]
    hx, hz = 8.0 / n, 2 * math.pi / n
    a_half = 1.0 + 0.5 * np.sin(np.linspace(-4, 4, n))
    ub2 = rng.normal(size=(n + 1, n + 1))
    f2 = rng.normal(size=(n - 1) ** 2)

    m = s["n3"]
    h3 = 8.0 / m
    a11 = 1.0 + rng.random((m, m + 1))
    a22 = 1.0 + rng.random((m + 1, m))
    a12 = 0.1 * rng.random((m + 1, m + 1))
    ub3 = rng.normal(size=(m + 1, m + 1, m + 1))
    f3 = rng.normal(size=(m - 1) ** 3)
    return {
        "synth_reduce": (C, B),
        "project": (V, w),
        "assemble_2d": (a_half, hx, hz, ub2, f2),
        "assemble_3d": (a11, a22, a12, h3, h3, 2 * math.pi / m, ub3, f3),
    }


def _same(name, a, b):
    if name.startswith("assemble"):
        # triplets may come out in a different order; compare the assembled matrices
        n = a[3].size
        A = sp.csr_matrix((a[2], (a[0], a[1])), shape=(n, n))
        B = sp.csr_matrix((b[2], (b[0], b[1])), shape=(n, n))
        return abs(A - B).max() <= 1e-12 and np.allclose(a[3], b[3], rtol=1e-12, atol=1e-12)
    return all(np.allclose(x, y, rtol=1e-12, atol=1e-12) for x, y in zip(np.atleast_1d(a), np.atleast_1d(b))) \
        if isinstance(a, tuple) else np.allclose(a, b, rtol=1e-12, atol=1e-12)


def bench(size, repeat):
    inputs = make_inputs(size)
    rows = []
    for name, args in inputs.items():
        py = getattr(_fallback, name)
        t_py = min(timeit.repeat(lambda: py(*args), number=1, repeat=repeat))
        row = {"kernel": name, "python_s": t_py, "cython_s": None, "speedup": None, "agree": None}
        if _kernels is not None:
            cy = getattr(_kernels, name)
            row["agree"] = bool(_same(name, py(*args), cy(*args)))
            t_cy = min(timeit.repeat(lambda: cy(*args), number=1, repeat=repeat))
            row["cython_s"] = t_cy
            row["speedup"] = t_py / t_cy if t_cy > 0 else math.inf
        rows.append(row)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", choices=sorted(SIZES), default="medium")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the rows as JSON")
    args = ap.parse_args(argv)

    if _kernels is None:
        print("compiled extension not built; timing the numpy fallback only", file=sys.stderr)
    rows = bench(args.size, args.repeat)
    print(f"{'kernel':14s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speedup':>8s}  agree")
    for r in rows:
        cy = "-" if r["cython_s"] is None else f"{1e3 * r['cython_s']:12.2f}"
        sp = "-" if r["speedup"] is None else f"{r['speedup']:7.1f}x"
        print(f"{r['kernel']:14s} {1e3 * r['python_s']:11.2f} {cy:>12s} {sp:>8s}  {r['agree']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"size": args.size, "rows": rows}, fh, indent=2)
    return 0 if all(r["agree"] in (None, True) for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
