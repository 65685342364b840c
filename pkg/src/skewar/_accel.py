"""Numba switch.

Hot kernels are written against the subset of numpy that numba's nopython
mode understands, so the same function bodies run either compiled or as
plain numpy. Set ``SKEWAR_DISABLE_NUMBA=1`` to force the numpy path; it is
also used automatically when numba cannot be imported.
"""

import os

_disabled = os.environ.get("SKEWAR_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    import numba
except ImportError:
    numba = None

USE_NUMBA = numba is not None


def jit(func):
    """``numba.njit(cache=True, nogil=True)`` when enabled, identity otherwise.

    ``nogil`` lets independent filter runs share a thread pool.
    """
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func
