"""Kernel backend selection.

The compiled extension (`graspfind._kernels._native`) is used when it imported
cleanly; otherwise the numpy fallback. Override with the environment variable
``GRASPFIND_BACKEND`` set to ``native`` or ``python`` (``auto`` is the
default). Both backends implement identical semantics; `graspfind bench
--compare-backends` measures the speed difference.
"""

from __future__ import annotations

import importlib
import os

from . import pyfallback

_requested = os.environ.get("GRASPFIND_BACKEND", "auto").lower()
if _requested not in ("auto", "native", "python"):
    raise RuntimeError(
        f"GRASPFIND_BACKEND must be auto, native, or python, got {_requested!r}"
    )

_native = None
if _requested in ("auto", "native"):
    try:
        _native = importlib.import_module(__name__ + "._native")
    except ImportError:
        if _requested == "native":
            raise RuntimeError(
                "GRASPFIND_BACKEND=native but the compiled kernels are not "
                "built; reinstall with Cython available"
            )

_impl = _native if _native is not None else pyfallback

BACKEND = "native" if _native is not None else "python"

EMPTY = pyfallback.EMPTY
COLLISION = pyfallback.COLLISION
NOT_ANTIPODAL = pyfallback.NOT_ANTIPODAL
POSITIVE = pyfallback.POSITIVE

raycast_cam = _impl.raycast_cam
eval_pose = _impl.eval_pose
collision_only = _impl.collision_only
push_offset = _impl.push_offset
label_orientation = _impl.label_orientation
descriptor_fill = _impl.descriptor_fill
im2col = _impl.im2col
col2im = _impl.col2im


def get_backend(name: str):
    """Return the named backend module ('native' or 'python'), for benchmarks."""
    if name == "python":
        return pyfallback
    if name == "native":
        if _native is None:
            raise RuntimeError("compiled kernels are not available")
        return _native
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["native", "python"] if _native is not None else ["python"]
