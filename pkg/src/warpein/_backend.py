"""Pick the compiled kernel when available, else the pure-Python one."""

from __future__ import annotations

import os

if os.environ.get("WARPEIN_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels
    COMPILED = False
else:
    try:
        from . import _kernels as kernels
        COMPILED = True
    except ImportError:
        from . import _kernels_py as kernels
        COMPILED = False

from . import _kernels_py as reference

__all__ = ["kernels", "reference", "COMPILED"]
