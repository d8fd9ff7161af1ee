"""Kernel dispatch: the compiled extension when available, else pure Python.

Set ``GRAPHDIFF_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("GRAPHDIFF_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"
N_ORBITS = 11
ORBIT_IDS = tuple(range(4, 15))


def _adj(A) -> np.ndarray:
    A = np.ascontiguousarray(np.asarray(A) != 0, dtype=np.uint8)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"adjacency must be square, got {A.shape}")
    return A


def _select(impl):
    """``None`` for the active backend, or "cython" / "python" explicitly."""
    if impl is None:
        return _impl
    if impl == "python":
        return _kernels_py
    if impl == "cython":
        if BACKEND != "cython":
            raise ImportError("compiled kernels are not built")
        return _impl
    raise ValueError(f"unknown kernel backend {impl!r}")


def triangles(A, impl=None) -> np.ndarray:
    """Triangles through each node."""
    return _select(impl).triangles(_adj(A))


def orbit4(A, impl=None) -> np.ndarray:
    """(n, 11) counts of node orbits 4..14 over connected induced 4-node subgraphs."""
    return _select(impl).orbit4(_adj(A))
