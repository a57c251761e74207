"""Hot kernels with a compiled backend and a pure-Python fallback.

The Cython extension is used when it imports; set ``IMPLICIT_BA_PURE_PYTHON=1``
to force the fallback. Both backends return bit-identical results.
"""

from __future__ import annotations

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("IMPLICIT_BA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend

BACKEND: str = _active.BACKEND
siphash24 = _active.siphash24
siphash24_u64 = _active.siphash24_u64
siphash24_u64_array = _active.siphash24_u64_array
nearest_key = _active.nearest_key
pairwise_common_honest = _active.pairwise_common_honest

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "siphash24",
    "siphash24_u64",
    "siphash24_u64_array",
    "nearest_key",
    "pairwise_common_honest",
]
