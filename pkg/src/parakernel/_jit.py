"""Optional numba acceleration.

Hot kernels are written once in plain numpy-compatible Python and compiled
with ``numba.njit`` when available.  Set ``PARAKERNEL_NUMBA=0`` before import
to force the pure-numpy fallback path.
"""
import os

_flag = os.environ.get("PARAKERNEL_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    if not _requested:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` if enabled, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(f):
        return f

    return wrapper


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
