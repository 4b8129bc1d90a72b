# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.  Same contracts as halfspace._fallback."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY
from scipy.linalg.cython_blas cimport dgemm, dgemv

cnp.import_array()


cdef Py_ssize_t _CHUNK = 1 << 16   # doubles per block of U held at once


def synth_reduce(double[:, ::1] C, double[:, ::1] B):
    """Blocks of U = C @ B come from BLAS; min, max and max|.| are taken in one pass."""
    cdef int P = C.shape[0], M = C.shape[1], Q = B.shape[1]
    cdef double vmin = INFINITY, vmax = -INFINITY, amax = 0.0, s
    cdef Py_ssize_t pmin = 0, qmin = 0, pmax = 0, qmax = 0, p, q
    if P == 0 or Q == 0:
        return (vmin, pmin, qmin, vmax, pmax, qmax, amax)
    cdef int rows = <int>max(1, min(P, _CHUNK // Q))
    U_a = np.zeros((rows, Q))
    cdef double[:, ::1] U = U_a
    cdef int start = 0, n, lda = Q, ldb = M, ldc = Q
    cdef double one = 1.0, zero = 0.0
    cdef char trans = b"N"
    with nogil:
        while start < P:
            n = rows if start + rows <= P else P - start
            if M > 0:
                # row-major U^T = B^T C^T in BLAS (column-major) terms
                dgemm(&trans, &trans, &lda, &n, &ldb, &one, &B[0, 0], &lda,
                      &C[start, 0], &ldb, &zero, &U[0, 0], &ldc)
            for p in range(n):
                for q in range(Q):
                    s = U[p, q]
                    if s < vmin:
                        vmin = s
                        pmin = start + p
                        qmin = q
                    if s > vmax:
                        vmax = s
                        pmax = start + p
                        qmax = q
                    if fabs(s) > amax:
                        amax = fabs(s)
            start += n
    return (vmin, pmin, qmin, vmax, pmax, qmax, amax)


def project(double[:, ::1] V, double[::1] w):
    cdef int P = V.shape[0], Q = V.shape[1], inc = 1
    out = np.zeros(P)
    cdef double[::1] o = out
    cdef double one = 1.0, zero = 0.0
    cdef char trans = b"T"
    if P == 0 or Q == 0:
        return out
    with nogil:
        dgemv(&trans, &Q, &P, &one, &V[0, 0], &Q, &w[0], &inc, &zero, &o[0], &inc)
    return out


cdef inline void _emit(Py_ssize_t row, Py_ssize_t i, Py_ssize_t j, Py_ssize_t k,
                       double coef, Py_ssize_t nx, Py_ssize_t ny, Py_ssize_t nz,
                       cnp.int64_t[::1] rows, cnp.int64_t[::1] cols, double[::1] vals,
                       Py_ssize_t* n, double[::1] rhs, double[:, :, ::1] ub) noexcept nogil:
    if i >= 1 and i <= nx - 1 and j >= 1 and j <= ny - 1 and k >= 1 and k <= nz - 1:
        rows[n[0]] = row
        cols[n[0]] = ((i - 1) * (ny - 1) + (j - 1)) * (nz - 1) + (k - 1)
        vals[n[0]] = coef
        n[0] += 1
    else:
        rhs[row] -= coef * ub[i, j, k]


def assemble_2d(a_half, double hx, double hy, ub, f):
    """See halfspace._fallback.assemble_2d."""
    cdef double[:, :, ::1] u3 = np.ascontiguousarray(np.asarray(ub, dtype=float)[:, :, None])
    # a 2-D problem is the 3-D stencil with a single interior layer in the last axis
    cdef Py_ssize_t nx = u3.shape[0] - 1, ny = u3.shape[1] - 1
    cdef double[::1] a = np.ascontiguousarray(a_half, dtype=float)
    cdef Py_ssize_t n_unknown = (nx - 1) * (ny - 1)
    rows_a = np.empty(5 * n_unknown, dtype=np.int64)
    cols_a = np.empty(5 * n_unknown, dtype=np.int64)
    vals_a = np.empty(5 * n_unknown)
    rhs_a = np.ascontiguousarray(np.asarray(f, dtype=float).ravel()).copy()
    cdef cnp.int64_t[::1] rows = rows_a, cols = cols_a
    cdef double[::1] vals = vals_a, rhs = rhs_a
    cdef Py_ssize_t i, j, row, n = 0
    cdef double ix2 = 1.0 / (hx * hx), iy2 = 1.0 / (hy * hy), aw, ae
    with nogil:
        for i in range(1, nx):
            aw = a[i - 1]
            ae = a[i]
            for j in range(1, ny):
                row = (i - 1) * (ny - 1) + (j - 1)
                rows[n] = row
                cols[n] = row
                vals[n] = (aw + ae) * ix2 + 2.0 * iy2 - 1.0
                n += 1
                _emit2(row, i - 1, j, -aw * ix2, nx, ny, rows, cols, vals, &n, rhs, u3)
                _emit2(row, i + 1, j, -ae * ix2, nx, ny, rows, cols, vals, &n, rhs, u3)
                _emit2(row, i, j - 1, -iy2, nx, ny, rows, cols, vals, &n, rhs, u3)
                _emit2(row, i, j + 1, -iy2, nx, ny, rows, cols, vals, &n, rhs, u3)
    return rows_a[:n], cols_a[:n], vals_a[:n], rhs_a


cdef inline void _emit2(Py_ssize_t row, Py_ssize_t i, Py_ssize_t j, double coef,
                        Py_ssize_t nx, Py_ssize_t ny,
                        cnp.int64_t[::1] rows, cnp.int64_t[::1] cols, double[::1] vals,
                        Py_ssize_t* n, double[::1] rhs, double[:, :, ::1] ub) noexcept nogil:
    if i >= 1 and i <= nx - 1 and j >= 1 and j <= ny - 1:
        rows[n[0]] = row
        cols[n[0]] = (i - 1) * (ny - 1) + (j - 1)
        vals[n[0]] = coef
        n[0] += 1
    else:
        rhs[row] -= coef * ub[i, j, 0]


def assemble_3d(a11_half, a22_half, a12_node, double hx, double hy, double hz, ub, f):
    """See halfspace._fallback.assemble_3d."""
    cdef double[:, :, ::1] u = np.ascontiguousarray(ub, dtype=float)
    cdef Py_ssize_t nx = u.shape[0] - 1, ny = u.shape[1] - 1, nz = u.shape[2] - 1
    cdef double[:, ::1] a11 = np.ascontiguousarray(a11_half, dtype=float)
    cdef double[:, ::1] a22 = np.ascontiguousarray(a22_half, dtype=float)
    cdef double[:, ::1] a12 = np.ascontiguousarray(a12_node, dtype=float)
    cdef Py_ssize_t n_unknown = (nx - 1) * (ny - 1) * (nz - 1)
    rows_a = np.empty(11 * n_unknown, dtype=np.int64)
    cols_a = np.empty(11 * n_unknown, dtype=np.int64)
    vals_a = np.empty(11 * n_unknown)
    rhs_a = np.ascontiguousarray(np.asarray(f, dtype=float).ravel()).copy()
    cdef cnp.int64_t[::1] rows = rows_a, cols = cols_a
    cdef double[::1] vals = vals_a, rhs = rhs_a
    cdef Py_ssize_t i, j, k, row, n = 0
    cdef double ix2 = 1.0 / (hx * hx), iy2 = 1.0 / (hy * hy), iz2 = 1.0 / (hz * hz)
    cdef double c = 1.0 / (4.0 * hx * hy)
    cdef double aw, ae, as_, an, e_, w_, n_, s_
    with nogil:
        for i in range(1, nx):
            for j in range(1, ny):
                aw = a11[i - 1, j]
                ae = a11[i, j]
                as_ = a22[i, j - 1]
                an = a22[i, j]
                e_ = a12[i + 1, j]
                w_ = a12[i - 1, j]
                n_ = a12[i, j + 1]
                s_ = a12[i, j - 1]
                for k in range(1, nz):
                    row = ((i - 1) * (ny - 1) + (j - 1)) * (nz - 1) + (k - 1)
                    rows[n] = row
                    cols[n] = row
                    vals[n] = (aw + ae) * ix2 + (as_ + an) * iy2 + 2.0 * iz2 - 1.0
                    n += 1
                    _emit(row, i - 1, j, k, -aw * ix2, nx, ny, nz, rows, cols, vals, &n, rhs, u)
                    _emit(row, i + 1, j, k, -ae * ix2, nx, ny, nz, rows, cols, vals, &n, rhs, u)
                    _emit(row, i, j - 1, k, -as_ * iy2, nx, ny, nz, rows, cols, vals, &n, rhs, u)
                    _emit(row, i, j + 1, k, -an * iy2, nx, ny, nz, rows, cols, vals, &n, rhs, u)
                    _emit(row, i, j, k - 1, -iz2, nx, ny, nz, rows, cols, vals, &n, rhs, u)
                    _emit(row, i, j, k + 1, -iz2, nx, ny, nz, rows, cols, vals, &n, rhs, u)
                    _emit(row, i + 1, j + 1, k, -(e_ + n_) * c, nx, ny, nz, rows, cols, vals, &n, rhs, u)
                    _emit(row, i + 1, j - 1, k, (e_ + s_) * c, nx, ny, nz, rows, cols, vals, &n, rhs, u)
                    _emit(row, i - 1, j + 1, k, (w_ + n_) * c, nx, ny, nz, rows, cols, vals, &n, rhs, u)
                    _emit(row, i - 1, j - 1, k, -(w_ + s_) * c, nx, ny, nz, rows, cols, vals, &n, rhs, u)
    return rows_a[:n], cols_a[:n], vals_a[:n], rhs_a
