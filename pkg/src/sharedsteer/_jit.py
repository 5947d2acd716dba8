"""Optional numba acceleration.

Hot kernels are written as plain Python over floats and numpy arrays and
decorated with :func:`kernel`. When numba is importable and the environment
variable ``SHAREDSTEER_DISABLE_NUMBA`` is unset (or ``0``), they are compiled
with ``numba.njit``; otherwise the undecorated functions run as-is.
"""

import os

_flag = os.environ.get("SHAREDSTEER_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def kernel(func):
    """Compile ``func`` in nopython mode when acceleration is enabled."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend():
    return "numba" if HAVE_NUMBA else "python"
