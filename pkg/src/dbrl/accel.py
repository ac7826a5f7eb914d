"""Optional numba acceleration with a pure-NumPy fallback.

Hot kernels elsewhere in the package are written as vectorized NumPy
functions and passed through :func:`maybe_jit`.  When numba is available
and enabled, the jitted dispatcher is used; otherwise the original
function runs as-is, so the fallback path is always the same NumPy code.

Set ``DBRL_DISABLE_NUMBA=1`` (or numba's own ``NUMBA_DISABLE_JIT=1``)
before import to force the pure-NumPy path.
"""

from __future__ import annotations

import os

DISABLE_ENV = "DBRL_DISABLE_NUMBA"


def _env_truthy(name: str) -> bool:
    return os.environ.get(name, "").strip() not in ("", "0")


try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on bare installs
    numba = None
    HAS_NUMBA = False

JIT_ENABLED = HAS_NUMBA and not _env_truthy(DISABLE_ENV) and not _env_truthy("NUMBA_DISABLE_JIT")


def maybe_jit(func=None, **njit_kwargs):
    """Decorate ``func`` with ``numba.njit`` when acceleration is on.

    Usable bare (``@maybe_jit``) or with numba keyword arguments.
    With acceleration off this returns the function unchanged, so the
    vectorized NumPy body is the fallback implementation.
    """

    def wrap(f):
        if JIT_ENABLED:
            njit_kwargs.setdefault("cache", True)
            return numba.njit(**njit_kwargs)(f)
        return f

    if func is not None:
        return wrap(func)
    return wrap


def py_func(kernel):
    """Return the pure-Python/NumPy implementation behind a kernel."""
    return getattr(kernel, "py_func", kernel)
