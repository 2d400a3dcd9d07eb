"""JIT switch for the numeric kernels.

Set ``CORDNER_DISABLE_NUMBA=1`` to run every kernel as plain Python over
numpy arrays. The flag is read once, at import time.
"""
import os

DISABLE_ENV = "CORDNER_DISABLE_NUMBA"

_disabled = os.environ.get(DISABLE_ENV, "").strip().lower() not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba
except ImportError:
    numba = None

USING_NUMBA = numba is not None


def njit(func):
    """Compile ``func`` in nopython mode, or return it unchanged.

    Compiled kernels release the GIL so thread-pool workers tag in parallel.
    The original function stays reachable as ``.py_func`` either way.
    """
    if numba is None:
        func.py_func = func
        return func
    return numba.njit(cache=True, nogil=True)(func)


__all__ = ["njit", "USING_NUMBA", "DISABLE_ENV"]
