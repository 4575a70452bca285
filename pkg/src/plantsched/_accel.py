"""Numba switch.

Hot kernels are written twice: a numba ``@njit`` loop version and a pure
numpy version. ``PLANTSCHED_DISABLE_NUMBA=1`` (or numba missing) selects the
numpy path everywhere. Kernels with no sensible vectorised form run their
loop version as plain Python in that mode.
"""
import os
import warnings

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_flag = os.environ.get("PLANTSCHED_DISABLE_NUMBA", "").strip().lower()
NUMBA_ENABLED = numba is not None and _flag in ("", "0", "false", "no")


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""

    def wrap(f):
        if NUMBA_ENABLED:
            opts = {"cache": True, "nogil": True}
            opts.update(kwargs)
            return numba.njit(**opts)(f)
        return f

    if func is not None:
        return wrap(func)
    return wrap


def set_threads(n):
    """Cap numba's worker pool; a no-op for one thread or without numba."""
    if NUMBA_ENABLED and n and int(n) > 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def backend():
    return "numba" if NUMBA_ENABLED else "numpy"
