"""Kernel backend selection.

The time-stepping kernels exist twice: a numba-compiled loop version and a
vectorised numpy version.  ``BRIDGELAB_NO_JIT=1`` in the environment (or a
missing numba) selects numpy.
"""
import os

try:
    import numba  # noqa: F401
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_JIT = HAS_NUMBA and os.environ.get("BRIDGELAB_NO_JIT", "0") not in ("1", "true", "yes")


def get_kernels(name=None):
    """Return the kernel module for ``name`` ("numba" or "numpy"); default per env flag."""
    if name is None:
        name = "numba" if USE_JIT else "numpy"
    if name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        from . import kernels_numba as k
    elif name == "numpy":
        from . import kernels_numpy as k
    else:
        raise ValueError(f"unknown backend {name!r}")
    return k


def backend_name():
    return "numba" if USE_JIT else "numpy"
