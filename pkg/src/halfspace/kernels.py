"""Backend selection for the hot loops.

The compiled extension is used when it was built; ``HALFSPACE_BACKEND=python``
forces the numpy fallback (handy for benchmarking and for debugging).
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("HALFSPACE_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

synth_reduce = _impl.synth_reduce
project = _impl.project
assemble_2d = _impl.assemble_2d
assemble_3d = _impl.assemble_3d

__all__ = ["BACKEND", "synth_reduce", "project", "assemble_2d", "assemble_3d"]
