"""Backend selection: compiled extension when available, numpy otherwise.

Set ``PVM_PURE_PYTHON=1`` to force the fallback (useful for benchmarking and
for debugging the extension against the reference).
"""

from __future__ import annotations

import os

if os.environ.get("PVM_PURE_PYTHON"):
    from . import _pyref as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _pyref as _impl  # type: ignore[no-redef]

BACKEND_NAME: str = _impl.NAME
unit_step = _impl.unit_step
window_sum_argmax = _impl.window_sum_argmax


def get_backend(name: str):
    """Explicit backend lookup, used by the benchmark and backend tests."""
    if name == "python":
        from . import _pyref
        return _pyref
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
