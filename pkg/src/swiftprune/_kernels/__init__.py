"""Kernel backend selection.

The compiled Cython extension is preferred when importable; the pure-Python
module is a drop-in replacement producing bit-identical results. Set
SWIFTPRUNE_BACKEND=python or =compiled to force a choice (forcing "compiled"
when the extension is missing raises at import time rather than silently
degrading).
"""

from __future__ import annotations

import os

from swiftprune._kernels import pyref

try:
    from swiftprune._kernels import _core
except ImportError:  # extension not built; pure-Python fallback only
    _core = None

_FORCED = os.environ.get("SWIFTPRUNE_BACKEND", "").strip().lower()

if _FORCED == "python":
    active = pyref
elif _FORCED == "compiled":
    if _core is None:
        raise ImportError(
            "SWIFTPRUNE_BACKEND=compiled but the swiftprune._kernels._core "
            "extension is not built"
        )
    active = _core
elif _FORCED:
    raise ImportError(f"unknown SWIFTPRUNE_BACKEND value: {_FORCED!r}")
else:
    active = _core if _core is not None else pyref


def backend_name() -> str:
    """Name of the backend in use: 'compiled' or 'python'."""
    return active.BACKEND


def available_backends() -> tuple[str, ...]:
    if _core is not None:
        return ("compiled", "python")
    return ("python",)


def get_backend(name: str | None = None):
    """Return a kernel module by name (None or 'active' -> selected one)."""
    if name is None or name == "active":
        return active
    if name == "python":
        return pyref
    if name == "compiled":
        if _core is None:
            raise ValueError("compiled backend is not available")
        return _core
    raise ValueError(f"unknown backend: {name!r}")
