"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise (or when
``SBTREES_PURE_PYTHON=1``) the pure-Python reference implementation is used.
Both take int64 contiguous arrays and return identical results.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SBTREES_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on the build
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("python", "cython") or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels  # type: ignore[attr-defined]

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def _i64(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.int64)


def partial_shuffle(labels: np.ndarray, start: int, offsets, backend=None) -> None:
    (backend or _impl).partial_shuffle(labels, int(start), _i64(offsets))


def dtree_walk(a, n, attach, nv, max_cuts=-1, finalize=True, backend=None):
    return (backend or _impl).dtree_walk(_i64(a), int(n), _i64(attach), int(nv), int(max_cuts), bool(finalize))


def tree_distance_matrix(parent, depth, points, backend=None) -> np.ndarray:
    return (backend or _impl).tree_distance_matrix(_i64(parent), _i64(depth), _i64(points))
