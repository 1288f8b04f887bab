"""Hot-loop kernels with a compiled core and a NumPy fallback.

The compiled extension (Cython) and the NumPy module implement the same
functions; whichever is available is selected at import time.  Set
``MVCONE_BACKEND=numpy`` or ``MVCONE_BACKEND=cython`` to force one (the
latter raises if the extension was not built).
"""

import os

from . import _numpy

_FORCED = os.environ.get("MVCONE_BACKEND", "").strip().lower()

_cython = None
if _FORCED != "numpy":
    try:
        from . import _core as _cython
    except ImportError:
        _cython = None
        if _FORCED == "cython":
            raise ImportError(
                "MVCONE_BACKEND=cython requested but the compiled kernel "
                "extension is not importable; reinstall with a C compiler "
                "or unset the variable")

_active = _cython if _cython is not None else _numpy

BACKEND = _active.NAME

raw_uint64 = _active.raw_uint64
standard_normals = _active.standard_normals
phi_paths_chunk = _active.phi_paths_chunk
wealth_paths_chunk = _active.wealth_paths_chunk
euler_chunk = _active.euler_chunk


def available_backends():
    """Names of importable backends, compiled one first."""
    names = []
    if _cython is not None:
        names.append(_cython.NAME)
    names.append(_numpy.NAME)
    return names


def get_backend(name=None):
    """Backend module by name; None returns the active selection."""
    if name is None:
        return _active
    if name == _numpy.NAME:
        return _numpy
    if _cython is not None and name == _cython.NAME:
        return _cython
    raise ValueError(f"backend {name!r} not available; "
                     f"have {available_backends()}")
