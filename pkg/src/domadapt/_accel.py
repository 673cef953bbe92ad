"""Numba switch.

Hot kernels are written twice: an explicit-loop version compiled with
``numba.njit`` and a vectorized numpy version.  Set ``DOMADAPT_NUMBA=0`` to
force the numpy path (also used automatically when numba is missing).
"""
import os


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(f):
        return f

    return wrap


def _have_numba():
    try:
        import numba  # noqa: F401

        return True
    except ImportError:
        return False


HAVE_NUMBA = _have_numba()
USE_NUMBA = HAVE_NUMBA and os.environ.get("DOMADAPT_NUMBA", "1").lower() not in (
    "0",
    "false",
    "no",
    "off",
)

if HAVE_NUMBA:
    from numba import njit
else:
    njit = _noop_jit


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
