"""Backend switch for the compiled kernels.

Kernels are written twice: a loop version compiled with ``numba.njit`` and a
vectorised numpy version. ``SARGMAX_LAB_NUMBA=0`` (or a missing numba install)
selects the numpy path for the whole process.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

__all__ = ["HAS_NUMBA", "USE_NUMBA", "njit", "backend"]

HAS_NUMBA = numba is not None
USE_NUMBA = HAS_NUMBA and os.environ.get("SARGMAX_LAB_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def njit(f=None, **setting):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if numba is None:
        if f is None:
            return lambda g: g
        return f
    setting.setdefault("cache", True)
    if f is None:
        return lambda g: numba.njit(g, **setting)
    return numba.njit(f, **setting)


def backend():
    return "numba" if USE_NUMBA else "numpy"
