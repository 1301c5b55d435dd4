"""Kernel backend selection.

Imports the compiled Cython core when it was built, otherwise falls back to
the pure-numpy reference implementation.  ``BACKEND`` reports which one is
active; :func:`get_backend` returns a specific one (used by the tests and
the kernel benchmark).
"""

from . import _ref

try:
    from . import _core as _impl
except ImportError:  # extension not built; numpy fallback
    _impl = _ref

BACKEND = _impl.BACKEND

trilinear_forward = _impl.trilinear_forward
trilinear_backward = _impl.trilinear_backward
composite_forward = _impl.composite_forward
composite_backward = _impl.composite_backward


def get_backend(name):
    """Return the kernel module for ``name`` ('numpy' or 'compiled')."""
    if name == "numpy":
        return _ref
    if name == "compiled":
        if _impl is _ref:
            raise ImportError("compiled kernel core is not built")
        return _impl
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["numpy"]
    if _impl is not _ref:
        names.append("compiled")
    return names
