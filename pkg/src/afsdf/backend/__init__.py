"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the numpy
fallback takes over transparently.  Both expose the same three functions
and produce bit-identical outputs, so the choice never changes results,
only speed.  Set ``AFSDF_BACKEND=python`` or ``AFSDF_BACKEND=compiled``
to force one side (the latter raises if the extension is missing).
"""

from __future__ import annotations

import os

_forced = os.environ.get("AFSDF_BACKEND", "").strip().lower()

if _forced == "python":
    from . import _py_kernels as _impl

    backend_name = "python"
elif _forced == "compiled":
    from . import _core as _impl  # type: ignore[no-redef]

    backend_name = "compiled"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        backend_name = "compiled"
    except ImportError:
        from . import _py_kernels as _impl  # type: ignore[no-redef]

        backend_name = "python"

SPLIT_EXHAUSTIVE = 0
SPLIT_RANDOM_THRESHOLD = 1

build_classification_tree = _impl.build_classification_tree
build_regression_tree = _impl.build_regression_tree
route_samples = _impl.route_samples

__all__ = [
    "SPLIT_EXHAUSTIVE",
    "SPLIT_RANDOM_THRESHOLD",
    "backend_name",
    "build_classification_tree",
    "build_regression_tree",
    "route_samples",
]
