"""Numba toggle for the hot kernels.

Set ``DEPTHTRACK_DISABLE_NUMBA=1`` to force the pure numpy/python path.
Every kernel exists in both forms; the dispatchers in the calling modules
pick one at import time via :data:`USE_NUMBA`.
"""

from __future__ import annotations

import os

_disabled = os.environ.get("DEPTHTRACK_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and not _disabled


def njit(func):
    """Compile ``func`` with numba when available; otherwise return it as is."""
    if _numba is None:  # pragma: no cover
        return func
    return _numba.njit(cache=True, nogil=True)(func)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
