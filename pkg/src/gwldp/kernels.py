"""Backend selection for the Monte Carlo kernels.

The compiled module is used when it imports; otherwise, or when the
environment variable ``GWLDP_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy fallback is used.  Both expose the same functions.
"""

from __future__ import annotations

import os

from . import _fallback

fallback = _fallback

_forced = os.environ.get("GWLDP_PURE_PYTHON", "") not in ("", "0")

compiled = None
if not _forced:
    try:
        from . import _core as compiled  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        compiled = None

backend = compiled if compiled is not None else _fallback
BACKEND = "compiled" if compiled is not None else "python"


def get(name: str | None = None):
    """Return a kernel module: ``"compiled"``, ``"python"`` or the default."""
    if name is None:
        return backend
    if name == "python":
        return _fallback
    if name == "compiled":
        if compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
