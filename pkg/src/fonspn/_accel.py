"""Optional numba acceleration.

Set ``FONSPN_NO_NUMBA=1`` to force the pure-numpy kernels even when numba
is importable.
"""

import functools
import os

_disabled = os.environ.get("FONSPN_NO_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is optional
    _nb = None

HAVE_NUMBA = _nb is not None
USE_NUMBA = HAVE_NUMBA and not _disabled

if HAVE_NUMBA:
    njit = functools.partial(_nb.njit, cache=True, nogil=True)
else:  # pragma: no cover
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
