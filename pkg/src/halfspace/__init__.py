"""Nonnegative solutions of -div(A(x') grad u) = u - g on the half-space.

Set ``HALFSPACE_THREADS`` before import to cap BLAS/OpenMP parallelism.
"""
import os as _os

_threads = _os.environ.get("HALFSPACE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"
