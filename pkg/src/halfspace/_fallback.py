"""Pure numpy implementations of the hot kernels (used when the extension is absent)."""
from __future__ import annotations

import numpy as np

_CHUNK = 1 << 21  # grid values held in memory at once


def synth_reduce(C: np.ndarray, B: np.ndarray):
    """Reduce U = C @ B without materialising it whole.

    Returns (min, p_min, q_min, max, p_max, q_max, max_abs).
    """
    C = np.ascontiguousarray(C, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    P, Q = C.shape[0], B.shape[1]
    rows = max(1, _CHUNK // max(Q, 1))
    best_min = (np.inf, 0, 0)
    best_max = (-np.inf, 0, 0)
    max_abs = 0.0
    for start in range(0, P, rows):
        U = C[start:start + rows] @ B
        k = int(np.argmin(U))
        p, q = divmod(k, Q)
        if U[p, q] < best_min[0]:
            best_min = (float(U[p, q]), start + p, q)
        k = int(np.argmax(U))
        p, q = divmod(k, Q)
        if U[p, q] > best_max[0]:
            best_max = (float(U[p, q]), start + p, q)
        max_abs = max(max_abs, float(np.max(np.abs(U))))
    return (*best_min, *best_max, max_abs)


def project(V: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted row sums V @ w."""
    return np.asarray(V, dtype=float) @ np.asarray(w, dtype=float)


def _scatter(shape_int, offsets, ub, f):
    """COO triplets for a stencil given as [(offset tuple, coefficient array)]."""
    dims = [n - 1 for n in shape_int]
    idx = np.indices(dims).reshape(len(dims), -1) + 1  # interior node indices
    n_unknown = idx.shape[1]
    strides = np.cumprod([1] + dims[::-1][:-1])[::-1]
    own = ((idx - 1) * strides[:, None]).sum(axis=0)
    rhs = np.asarray(f, dtype=float).ravel().copy()
    rows, cols, vals = [], [], []
    for off, coef in offsets:
        coef = np.broadcast_to(np.asarray(coef, dtype=float).ravel(), (n_unknown,))
        nb = idx + np.asarray(off)[:, None]
        inside = np.all((nb >= 1) & (nb <= np.asarray(dims)[:, None]), axis=0)
        rows.append(own[inside])
        cols.append(((nb[:, inside] - 1) * strides[:, None]).sum(axis=0))
        vals.append(coef[inside])
        out = ~inside
        if out.any():
            rhs[out] -= coef[out] * ub[tuple(nb[:, out])]
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), rhs


def assemble_2d(a_half, hx: float, hy: float, ub, f):
    """-(a u_x)_x - u_yy - u on interior nodes of an (nx+1) x (ny+1) grid.

    ``a_half[i]`` is the coefficient at x_{i+1/2}; ``ub`` holds Dirichlet data on
    the full grid (interior entries ignored); ``f`` is the interior right-hand side.
    """
    ub = np.asarray(ub, dtype=float)
    nx, ny = ub.shape[0] - 1, ub.shape[1] - 1
    a_half = np.asarray(a_half, dtype=float)
    aw = np.repeat(a_half[: nx - 1], ny - 1)
    ae = np.repeat(a_half[1:nx], ny - 1)
    ix2, iy2 = 1.0 / hx ** 2, 1.0 / hy ** 2
    offsets = [
        ((0, 0), (aw + ae) * ix2 + 2.0 * iy2 - 1.0),
        ((-1, 0), -aw * ix2),
        ((1, 0), -ae * ix2),
        ((0, -1), -iy2),
        ((0, 1), -iy2),
    ]
    return _scatter((nx, ny), offsets, ub, f)


def assemble_3d(a11_half, a22_half, a12_node, hx: float, hy: float, hz: float, ub, f):
    """-div(A grad u) - u on interior nodes of an (nx+1)(ny+1)(nz+1) grid.

    A = [[a11, a12, 0], [a12, a22, 0], [0, 0, 1]] with a11 given at (i+1/2, j),
    a22 at (i, j+1/2) and a12 at the nodes (i, j).
    """
    ub = np.asarray(ub, dtype=float)
    nx, ny, nz = (s - 1 for s in ub.shape)
    a11 = np.asarray(a11_half, dtype=float)
    a22 = np.asarray(a22_half, dtype=float)
    a12 = np.asarray(a12_node, dtype=float)
    I, J = np.meshgrid(np.arange(1, nx), np.arange(1, ny), indexing="ij")

    def per_column(v):
        return np.repeat(v.ravel(), nz - 1)

    aw = per_column(a11[I - 1, J])
    ae = per_column(a11[I, J])
    as_ = per_column(a22[I, J - 1])
    an = per_column(a22[I, J])
    ix2, iy2, iz2 = 1.0 / hx ** 2, 1.0 / hy ** 2, 1.0 / hz ** 2
    c = 1.0 / (4.0 * hx * hy)
    e_, w_ = per_column(a12[I + 1, J]), per_column(a12[I - 1, J])
    n_, s_ = per_column(a12[I, J + 1]), per_column(a12[I, J - 1])
    offsets = [
        ((0, 0, 0), (aw + ae) * ix2 + (as_ + an) * iy2 + 2.0 * iz2 - 1.0),
        ((-1, 0, 0), -aw * ix2),
        ((1, 0, 0), -ae * ix2),
        ((0, -1, 0), -as_ * iy2),
        ((0, 1, 0), -an * iy2),
        ((0, 0, -1), -iz2),
        ((0, 0, 1), -iz2),
        ((1, 1, 0), -(e_ + n_) * c),
        ((1, -1, 0), (e_ + s_) * c),
        ((-1, 1, 0), (w_ + n_) * c),
        ((-1, -1, 0), -(w_ + s_) * c),
    ]
    return _scatter((nx, ny, nz), offsets, ub, f)
