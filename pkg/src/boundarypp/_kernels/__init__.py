"""Kernel backend selection.

The compiled module is used when importable; setting the environment
variable ``BOUNDARYPP_PURE_PYTHON=1`` forces the NumPy fallback.
"""
import os

from . import _pykernels
from ._pykernels import MAXITER, OPTIMAL, SINGULAR, UNBOUNDED

BACKEND = "python"
minimax_fit = _pykernels.minimax_fit
block_extrema = _pykernels.block_extrema

if os.environ.get("BOUNDARYPP_PURE_PYTHON", "").strip() in ("", "0"):
    try:
        from . import _ckernels
    except ImportError:  # pragma: no cover - depends on the build
        _ckernels = None
    else:
        BACKEND = "cython"
        minimax_fit = _ckernels.minimax_fit
        block_extrema = _ckernels.block_extrema

__all__ = [
    "BACKEND",
    "MAXITER",
    "OPTIMAL",
    "SINGULAR",
    "UNBOUNDED",
    "block_extrema",
    "minimax_fit",
]
