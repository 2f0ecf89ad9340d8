"""JIT switch for the numeric kernels.

Set ``SPARSEPORT_JIT=0`` to run every kernel as plain Python/NumPy.  The flag
is read once, at import time.
"""
import os

try:
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

JIT_ENABLED = HAVE_NUMBA and os.environ.get("SPARSEPORT_JIT", "1").lower() not in (
    "0",
    "false",
    "off",
    "no",
)


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if JIT_ENABLED:
        kwargs.setdefault("cache", True)
        return nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func
