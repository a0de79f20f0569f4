"""Optional numba acceleration.

Set ``MARGIN_LAB_DISABLE_NUMBA=1`` before import to force the pure-numpy kernels.
"""
import os

_DISABLED = os.environ.get("MARGIN_LAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by environment")
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:
    _numba_njit = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a passthrough decorator."""
    if HAVE_NUMBA:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(func):
        return func

    return wrap


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
