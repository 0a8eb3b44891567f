"""Backend selection: compiled extension if importable, else pure Python.

Set ``MVEMBED_BACKEND=python`` or ``=c`` to force one side; forcing ``c``
raises if the extension was not built. Both backends consume identical RNG
streams, so walks and training draws match across them.
"""

from __future__ import annotations

import os

_requested = os.environ.get("MVEMBED_BACKEND", "").strip().lower()

if _requested in ("", "c", "compiled"):
    try:
        from . import _sgns as _impl
        BACKEND = "c"
    except ImportError:
        if _requested:
            raise
        from . import _sgns_py as _impl
        BACKEND = "python"
elif _requested in ("py", "python"):
    from . import _sgns_py as _impl
    BACKEND = "python"
else:
    raise RuntimeError(f"unknown MVEMBED_BACKEND value {_requested!r}")

sample_walk_groups = _impl.sample_walk_groups
train_slice = _impl.train_slice


def get_backend(name: str):
    """Explicit backend module lookup, used by parity tests and benchmarks."""
    if name == "c":
        from . import _sgns
        return _sgns
    if name == "python":
        from . import _sgns_py
        return _sgns_py
    raise ValueError(f"unknown backend {name!r}")
