"""Backend selection for the compiled kernels.

Set ``AERISK_NO_NUMBA=1`` to force the pure-numpy implementations, e.g. to
check agreement or to run where numba is unavailable.
"""

import os

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("AERISK_NO_NUMBA", "").strip().lower() not in (
    "1",
    "true",
    "yes",
)


def optional_njit(*args, **kwargs):
    """``numba.njit`` when numba is present, identity otherwise."""

    def decorator(func):
        if HAVE_NUMBA:
            return _njit(*args, **kwargs)(func)
        return func

    return decorator


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
