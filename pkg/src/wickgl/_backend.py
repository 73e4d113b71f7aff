"""Backend selection for the Monte Carlo trajectory kernel.

The compiled extension (wickgl._kernels, Cython) is preferred when it
imports; otherwise the pure numpy implementation is used.  Both expose
run_block(plan, lo, hi) with identical semantics.  WICKGL_BACKEND=pure or
WICKGL_BACKEND=compiled forces the choice (the latter raises if the
extension is missing).
"""

from __future__ import annotations

import os

from . import _purepy

_FORCED = os.environ.get("WICKGL_BACKEND", "").strip().lower()

if _FORCED == "pure":
    _impl = _purepy
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _FORCED == "compiled":
            raise ImportError(
                "WICKGL_BACKEND=compiled but wickgl._kernels is not built; "
                "reinstall with a C compiler available"
            ) from None
        _impl = _purepy

BACKEND_NAME: str = _impl.BACKEND_NAME
run_block = _impl.run_block


def available_backends() -> dict:
    """Importable backends by name (for benchmarks and tests)."""
    out = {"pure": _purepy}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
