"""JIT selection for the interpreter kernels.

Kernels are plain Python functions over numpy arrays and int64 scalars. By
default they are compiled with ``numba.njit``; setting ``PROCFUZZ_DISABLE_JIT=1``
leaves them as ordinary Python running on numpy scalars, which is slow but has
identical wrapping semantics. The flag is read once at import time.
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

DISABLE_ENV = "PROCFUZZ_DISABLE_JIT"

JIT_ENABLED = os.environ.get(DISABLE_ENV, "").strip().lower() not in ("1", "true", "yes", "on")

if JIT_ENABLED:
    from numba import njit

    def jit(fn):
        return njit(cache=True, nogil=True)(fn)

else:

    def jit(fn):
        return fn


def backend_name() -> str:
    return "numba" if JIT_ENABLED else "numpy"


def kernel_context():
    """Context for calling a kernel: the fallback relies on wrapping int64
    arithmetic, so numpy's overflow warnings are silenced there."""
    if JIT_ENABLED:
        return contextlib.nullcontext()
    return np.errstate(over="ignore", invalid="ignore", divide="ignore")
