"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``LOOPSOUP_PURE_PYTHON=1``
to force the numpy fallback.  :func:`get_backend` exposes either one by name
for benchmarks and parity tests.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()
_force_py = os.environ.get("LOOPSOUP_PURE_PYTHON", "").strip() not in ("", "0")

if _compiled is not None and not _force_py:
    _impl: ModuleType = _compiled
    BACKEND = "compiled"
else:
    _impl = _pykernels
    BACKEND = "python"

cover_scan = _impl.cover_scan
wos_run = _impl.wos_run
cluster_segments = _impl.cluster_segments
segment_distance = _impl.segment_distance
STEP_STRIDE = 1 << 24


def get_backend(name: str) -> ModuleType:
    """Return the ``"compiled"`` or ``"python"`` kernel module."""
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    return _compiled is not None
