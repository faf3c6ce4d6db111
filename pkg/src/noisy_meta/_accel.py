"""Numba dispatch.

Set ``NOISY_META_DISABLE_NUMBA=1`` to force the pure-numpy kernels. Numba's own
``NUMBA_DISABLE_JIT=1`` also works but runs the loop kernels as interpreted
Python, which is much slower than the numpy path.
"""
import os

_FLAG = "NOISY_META_DISABLE_NUMBA"

try:
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    HAVE_NUMBA = False
    _njit = None


def numba_enabled():
    return HAVE_NUMBA and os.environ.get(_FLAG, "0") not in ("1", "true", "yes")


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise the identity decorator."""
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
