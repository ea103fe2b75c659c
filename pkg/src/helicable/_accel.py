"""Numba switch shared by the hot kernels.

Set ``HELICABLE_NO_NUMBA=1`` before import to run every kernel through its
pure-numpy implementation instead of the jitted loop.
"""
from __future__ import annotations

import os

USE_NUMBA = os.environ.get("HELICABLE_NO_NUMBA", "0").lower() not in ("1", "true", "yes")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None
    USE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


if numba is not None:
    prange = numba.prange
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the system TBB is too old for numba and only produces a warning
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
else:  # pragma: no cover
    prange = range
