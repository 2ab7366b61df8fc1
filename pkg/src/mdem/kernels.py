"""Kernel backend selection.

The compiled extension is used when importable; set ``MDEM_PURE_PYTHON=1``
to force the pure-Python fallback.
"""
import os

from . import _pykernels

try:
    if os.environ.get("MDEM_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

delaunay = _impl.delaunay
assemble_cst = _impl.assemble_cst
orient2d = _impl.orient2d
incircle = _impl.incircle
