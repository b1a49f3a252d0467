"""JIT selection for the hot kernels.

Kernels are written in the numba-compatible subset of Python. When numba is
importable and ``SPEEDPART_DISABLE_JIT`` is unset (or ``0``), they are compiled
with ``numba.njit``; otherwise they run as plain Python over numpy arrays, and
modules switch to their vectorized numpy variants where one exists.
"""
import os

_flag = os.environ.get("SPEEDPART_DISABLE_JIT", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False

USE_JIT = HAS_NUMBA


def jit(func):
    """Compile ``func`` with numba in nopython mode when enabled."""
    if not USE_JIT:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def py_func(kernel):
    """Return the uncompiled Python function behind ``kernel``."""
    return getattr(kernel, "py_func", kernel)
