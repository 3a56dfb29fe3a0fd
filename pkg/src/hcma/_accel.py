"""Backend switch for the hot numerical kernels.

Kernels are compiled with numba when it is importable and the environment
variable ``HCMA_DISABLE_NUMBA`` is unset (or ``0``). Otherwise the pure numpy
implementations in :mod:`hcma.kernels` are used. Both paths compute the same
quantities; the numba path is only faster.
"""
from __future__ import annotations

import os

_FLAG = "HCMA_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "0").strip().lower() in ("", "0", "false", "no")


try:  # pragma: no cover - exercised implicitly
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _numba_requested()


def njit(fn):
    """Compile ``fn`` with numba if available, else return it unchanged."""
    if _numba is None:
        return fn
    return _numba.njit(cache=True, fastmath=False)(fn)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
