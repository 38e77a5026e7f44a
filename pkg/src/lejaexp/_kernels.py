"""Kernel backend selection.

The compiled extension is preferred; set ``LEJAEXP_PURE_PYTHON=1`` to force
the numpy fallback.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return active
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}; "
                         f"available: {available_backends()}") from None


if os.environ.get("LEJAEXP_PURE_PYTHON", "") not in ("", "0"):
    active = _pykernels
else:
    active = _ckernels if _ckernels is not None else _pykernels

BACKEND = active.NAME
