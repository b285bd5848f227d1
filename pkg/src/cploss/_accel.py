"""Backend switch for the hot raster kernels.

Numba is used when importable unless ``CPLOSS_DISABLE_NUMBA`` is set to a
truthy value before import. Both backends return identical results.
"""
import os

_FLAG = os.environ.get("CPLOSS_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """``numba.njit(cache=True)`` when numba is installed, identity otherwise.

    The decorated function stays importable either way; whether it is *called*
    is decided by the dispatchers via ``USE_NUMBA``.
    """
    if numba is None:  # pragma: no cover
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
