"""Hot interpolation kernels with backend selection at import time.

The compiled Cython extension is used when available; otherwise the numpy
implementation takes over.  Set HOMFRAC_PURE_PYTHON=1 to force the numpy
backend (useful for the benchmark and for debugging).
"""

import os

from . import _numpy_impl

if os.environ.get("HOMFRAC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _numpy_impl
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _numpy_impl

BACKEND = _impl.BACKEND
periodic_ml_interp = _impl.periodic_ml_interp
box_ml_interp = _impl.box_ml_interp

__all__ = ["BACKEND", "periodic_ml_interp", "box_ml_interp"]
