"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``SLOWDIFF_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy fallback is used. Both expose the same functions.
"""
import os

from . import _fallback

fallback = _fallback
compiled = None
if os.environ.get("SLOWDIFF_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

backend = compiled if compiled is not None else _fallback
BACKEND_NAME = "compiled" if compiled is not None else "numpy"

__all__ = ["backend", "compiled", "fallback", "BACKEND_NAME"]
