"""Numba toggle.

Set ``CACHESIM_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
implementation. The flag is read once, at import time.
"""

import os

_FALSEY = ("", "0", "false", "no", "off")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("CACHESIM_DISABLE_NUMBA", "0").lower() in _FALSEY


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise.

    Kernels are always compiled when numba exists so that both paths stay
    testable side by side; ``USE_NUMBA`` only decides which one the public
    dispatchers call.
    """
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)
