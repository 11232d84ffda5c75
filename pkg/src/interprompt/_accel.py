"""Optional numba acceleration.

Set ``INTERPROMPT_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When numba
is missing the numpy kernels are used regardless of the flag.
"""

from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda func: func


def numba_disabled() -> bool:
    return os.environ.get("INTERPROMPT_DISABLE_NUMBA", "").strip().lower() not in _FALSY


USE_NUMBA = NUMBA_AVAILABLE and not numba_disabled()

__all__ = ["njit", "NUMBA_AVAILABLE", "USE_NUMBA", "numba_disabled"]
