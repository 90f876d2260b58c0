"""Kernel backend selection.

Hot inner loops (ray casting, UV rasterization, Gauss-Seidel relaxation) have
two implementations: numba ``@njit`` kernels and vectorized pure-numpy
fallbacks. The active backend is picked once at import time from the
``DREAMPIPE_BACKEND`` environment variable:

    auto   -- numba when importable, numpy otherwise (default)
    numba  -- force numba, raise if unavailable
    numpy  -- force the pure-numpy paths

Both implementations of every kernel stay importable regardless of the flag
(the benchmark suite calls them directly); the flag only controls dispatch.
"""

import os

_choice = os.environ.get("DREAMPIPE_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"DREAMPIPE_BACKEND must be one of auto|numba|numpy, got {_choice!r}"
    )

if _choice == "numpy":
    NUMBA_AVAILABLE = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:
        if _choice == "numba":
            raise RuntimeError("DREAMPIPE_BACKEND=numba but numba is not importable")
        NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE

if NUMBA_AVAILABLE:
    from numba import njit, prange
else:
    def njit(*args, **kwargs):
        """No-op stand-in so numba kernel modules still import."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap

    prange = range


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
