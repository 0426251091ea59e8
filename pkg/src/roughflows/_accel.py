"""
Numba availability and the switch between compiled and pure-numpy kernels.

Set ``ROUGHFLOWS_DISABLE_NUMBA=1`` to force the numpy path even when numba is
installed.  The flag is read once, at import time.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}


def _env_disabled():
    return os.environ.get("ROUGHFLOWS_DISABLE_NUMBA", "").strip().lower() not in _FALSY


try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(func):
            return func

        return wrapper


USE_NUMBA = HAVE_NUMBA and not _env_disabled() and not (
    HAVE_NUMBA and numba.config.DISABLE_JIT
)


def backend():
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"
