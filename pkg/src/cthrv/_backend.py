"""Kernel backend selection.

Numba is used when importable unless ``CTHRV_PURE_NUMPY`` is set to a truthy
value, in which case every kernel runs its pure-numpy/Python fallback.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

PURE_NUMPY = os.environ.get("CTHRV_PURE_NUMPY", "").strip().lower() not in _FALSY

try:
    import numba
except ImportError:  # pragma: no cover - numba is an install requirement
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not PURE_NUMPY


def njit(func):
    """Compile ``func`` in nopython mode, or return the numba-free version."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def thread_count():
    """Parallelism cap from ``CTHRV_THREADS`` (default: all cores)."""
    raw = os.environ.get("CTHRV_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n >= 1:
            return n
    return os.cpu_count() or 1
