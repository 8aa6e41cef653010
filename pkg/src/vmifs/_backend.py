"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
``VMIFS_BACKEND=python`` forces the fallback.
"""

import logging
import os

from . import _kernels_py

logger = logging.getLogger(__name__)

try:
    from . import _kernels_cy
except ImportError:  # extension not built
    _kernels_cy = None

_BACKENDS = {"python": _kernels_py}
if _kernels_cy is not None:
    _BACKENDS["cython"] = _kernels_cy


def _default():
    forced = os.environ.get("VMIFS_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            logger.warning("backend %r unavailable, using numpy fallback", forced)
            return _kernels_py
        return _BACKENDS[forced]
    return _kernels_cy if _kernels_cy is not None else _kernels_py


_active = _default()


def kernels():
    return _active


def available():
    return sorted(_BACKENDS)


def use(name):
    """Switch the active backend; returns the previous backend name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available()})")
    prev = _active.NAME
    _active = _BACKENDS[name]
    return prev
