"""Kernel backend selection.

The hot inner loops (convolution, bilinear resampling, windowed pooling)
exist twice: a numba-jitted version and a pure-numpy version.  Both follow
the same per-output-element accumulation order, so forward results are
bit-identical across backends.  ``ENTO_BACKEND`` picks one:

    ENTO_BACKEND=numba   force the jitted kernels (error if numba missing)
    ENTO_BACKEND=numpy   force the pure-numpy path
    ENTO_BACKEND=auto    numba when importable, numpy otherwise (default)

``ENTO_THREADS`` caps the worker count used for embarrassingly parallel
work (per-image metric evaluation); kernels themselves run single-threaded
so results never depend on it.
"""

import os

from ..errors import ConfigError

_VALID = ("auto", "numba", "numpy")


def _numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend(name=None):
    """Return 'numba' or 'numpy' for a requested backend name."""
    if name is None:
        name = os.environ.get("ENTO_BACKEND", "auto").strip().lower()
    if name not in _VALID:
        raise ConfigError(
            f"ENTO_BACKEND must be one of {_VALID}, got {name!r}"
        )
    if name == "numba" and not _numba_available():
        raise ConfigError("ENTO_BACKEND=numba but numba is not importable")
    if name == "auto":
        return "numba" if _numba_available() else "numpy"
    return name


def load_kernels(name=None):
    """Import and return the kernel module for the resolved backend."""
    resolved = resolve_backend(name)
    if resolved == "numba":
        from . import kernels_numba as mod
    else:
        from . import kernels_numpy as mod
    return mod


def thread_count():
    """Worker cap from ENTO_THREADS (default 1)."""
    raw = os.environ.get("ENTO_THREADS", "1").strip()
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"ENTO_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise ConfigError(f"ENTO_THREADS must be >= 1, got {n}")
    return n
