"""Kernel backend selection.

The compiled extension is used when it was built; otherwise, or when
``DSOVT_PURE_PYTHON=1`` is set, the NumPy fallback is loaded.
"""
import os

from dsovt import _pykernels

if os.environ.get("DSOVT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from dsovt import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

nearest_owner = _impl.nearest_owner
lf_step = _impl.lf_step
lf_advance = _impl.lf_advance

__all__ = ["BACKEND", "nearest_owner", "lf_step", "lf_advance"]
