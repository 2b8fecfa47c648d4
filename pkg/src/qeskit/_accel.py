"""Numba switch.

Set ``QESKIT_DISABLE_NUMBA=1`` to run every hot kernel on its pure-numpy path.
The flag is read once at import time.
"""

import os

try:  # pragma: no cover - import guard
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and os.environ.get("QESKIT_DISABLE_NUMBA", "").strip().lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


def njit(fn):
    """``numba.njit(cache=True)`` when numba is usable, otherwise the plain function."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)
