"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise (or when
``D2OC_PURE_PYTHON=1``) the numpy twins are used. Both give identical
results.
"""
import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("D2OC_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py
else:
    _impl = _kernels_py

network_simplex = _impl.network_simplex
greedy_merge = _impl.greedy_merge
farthest_point_order = _impl.farthest_point_order

__all__ = ["BACKEND", "network_simplex", "greedy_merge", "farthest_point_order"]
