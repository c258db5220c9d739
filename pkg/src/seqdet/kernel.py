"""Selects the slot-loop implementation at import time.

The compiled extension is used when it was built; setting
``SEQDET_PURE_PYTHON=1`` forces the pure-Python fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernel_py


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernel
    except ImportError:
        return None
    return _kernel


_compiled = _load_compiled()
_force_py = os.environ.get("SEQDET_PURE_PYTHON", "").strip() not in ("", "0")

impl: ModuleType = _kernel_py if (_force_py or _compiled is None) else _compiled
BACKEND = "python" if impl is _kernel_py else "cython"


def backend(name: str) -> ModuleType:
    """Explicit implementation by name (``"python"`` or ``"cython"``)."""
    if name == "python":
        return _kernel_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel not built")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


def compiled_available() -> bool:
    return _compiled is not None
