"""Select the compiled kernel extension or the numpy fallback at import.

Set COLLECTION_FORGE_BACKEND=python (or =compiled) to force a choice;
by default the compiled extension is used when it imports cleanly.
"""

from __future__ import annotations

import os

_requested = os.environ.get("COLLECTION_FORGE_BACKEND", "auto").strip().lower()

if _requested not in ("auto", "compiled", "python"):
    raise ValueError(f"COLLECTION_FORGE_BACKEND must be auto/compiled/python, "
                     f"got {_requested!r}")

if _requested == "python":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _kernels_py as _impl

BACKEND = _impl.IMPLEMENTATION

prox_l1 = _impl.prox_l1
prox_group_l21 = _impl.prox_group_l21
group_l21_norm = _impl.group_l21_norm
fista_quadratic = _impl.fista_quadratic
