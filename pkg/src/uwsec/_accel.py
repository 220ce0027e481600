"""Backend selection for the hot rollout kernels.

Numba is used when importable unless ``UWSEC_DISABLE_NUMBA`` is set to a
truthy value, in which case the pure-numpy kernels are used instead. The
choice is made once at import time; ``backend()`` reports it.
"""
from __future__ import annotations

import os
import warnings

_FLAG = "UWSEC_DISABLE_NUMBA"


def _disabled() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    if _disabled():
        raise ImportError("numba disabled by " + _FLAG)
    import numba as _numba

    # only a fallback-layer notice; numba picks another threading layer
    warnings.filterwarnings("ignore", message="The TBB threading layer")

    HAS_NUMBA = True
except ImportError:
    _numba = None
    HAS_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAS_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


prange = _numba.prange if HAS_NUMBA else range


def backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"


def set_workers(n: int | None) -> None:
    """Set the numba thread count; a no-op on the numpy backend."""
    if n is None or not HAS_NUMBA:
        return
    n = max(1, min(int(n), _numba.config.NUMBA_NUM_THREADS))
    _numba.set_num_threads(n)


def workers() -> int:
    return _numba.get_num_threads() if HAS_NUMBA else 1
