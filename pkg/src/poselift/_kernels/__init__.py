"""Kernel backend selection: compiled core with a pure-Python fallback.

The hot per-batch kernels (batch-norm, activation/dropout, optimizer
updates, loss) exist twice: a Cython extension (_ckernels) and a numpy
reference (pykernels) with identical signatures. At import time the
extension is picked when available; set POSELIFT_BACKEND=python or =cython
to force one. Dense-layer matmuls use numpy's BLAS in both backends.

Backends are numerically equivalent but not bit-identical (numpy reduces
with pairwise summation, the compiled loops sequentially), so outputs are
reproducible per backend.
"""

import os

from . import pykernels

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_BACKENDS = {"python": pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def _initial_backend():
    requested = os.environ.get("POSELIFT_BACKEND", "auto")
    if requested == "auto":
        return "cython" if _ckernels is not None else "python"
    if requested not in ("python", "cython"):
        raise RuntimeError(f"POSELIFT_BACKEND must be auto, python or cython, got {requested!r}")
    if requested == "cython" and _ckernels is None:
        raise RuntimeError("POSELIFT_BACKEND=cython but the compiled kernels are not built")
    return requested


_active_name = _initial_backend()


def available_backends():
    return tuple(sorted(_BACKENDS))


def backend_name():
    return _active_name


def set_backend(name):
    """Switch the kernel backend (used by tests and the benchmark).

    Do not switch in the middle of a training run.
    """
    global _active_name
    if name not in _BACKENDS:
        raise RuntimeError(f"unknown backend {name!r}, available: {available_backends()}")
    _active_name = name


def get():
    """Module implementing the active backend's kernels."""
    return _BACKENDS[_active_name]
