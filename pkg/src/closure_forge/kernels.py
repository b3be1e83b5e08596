"""Backend selection for the hot kernels.

The compiled extension is used when it was built; ``CLOSURE_FORGE_PURE=1``
forces the numpy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("CLOSURE_FORGE_PURE", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

gmic_coefficients = _impl.gmic_coefficients
integer_grid = _impl.integer_grid
slice_min = _impl.slice_min


def compiled():
    """The compiled module, or None when it is not built."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels
