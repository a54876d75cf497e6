"""Kernel backend selection.

Hot loops are compiled with numba when available. Setting the environment
variable SPADSIM_NUMBA=0 (or "false"/"off"/"no") before import selects a pure
Python fallback that executes the identical source, so results are bit-equal
between backends. The flag is read once at import time.
"""

import os

__all__ = ["NUMBA_ENABLED", "jit_kernel"]

_flag = os.environ.get("SPADSIM_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _flag not in ("0", "false", "off", "no")

if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay importable
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    def jit_kernel(func):
        """Compile a kernel; the original stays reachable as .py_func."""
        return _njit(cache=True, nogil=True)(func)

else:

    def jit_kernel(func):
        """Identity decorator; exposes .py_func for a uniform benchmark API."""
        func.py_func = func
        return func
