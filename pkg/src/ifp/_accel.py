"""Backend selection for the hot kernels.

Every kernel in the package has a numba implementation and a vectorized
numpy implementation.  The numba path is used when numba imports cleanly and
the environment variable ``IFP_DISABLE_NUMBA`` is unset (or ``0``).
"""

import os

_FALSY = ("", "0", "false", "no", "off")

try:
    import numba

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the installed TBB is too old for numba; use OpenMP
        numba.config.THREADING_LAYER = "omp"
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("IFP_DISABLE_NUMBA", "").lower() in _FALSY


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, otherwise a no-op decorator.

    Kernels are always compiled lazily; whether they are *called* is decided
    by the dispatchers through :data:`USE_NUMBA`.
    """
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


if HAVE_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


def set_threads(n):
    """Set the numba thread count (no-op without numba)."""
    if n is None or not HAVE_NUMBA:
        return
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
