"""Numba dispatch.

Set ``GRASPVIEW_NO_NUMBA=1`` to force the pure-numpy kernels (also used
automatically when numba is not importable).
"""
import os

USE_NUMBA = os.environ.get("GRASPVIEW_NO_NUMBA", "").lower() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if not USE_NUMBA:
    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f
        return wrapper
