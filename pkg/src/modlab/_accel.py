"""Optional numba acceleration.

Set ``MODLAB_NO_NUMBA=1`` to force the pure-numpy kernels even when numba is
installed. The flag is read once, at import time.
"""
import os
from typing import Any, Callable

_disabled = os.environ.get("MODLAB_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _disabled:
        raise ImportError("numba disabled by MODLAB_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args: Any, **_: Any) -> Callable:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
