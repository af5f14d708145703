"""Backend selection for the hot kernels.

The compiled extension is used when it was built and ``HODGE_SPECTRA_PURE`` is
unset; otherwise the numpy/pure-Python versions are used. Both expose the same
functions with identical results.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from . import _pykernels

try:
    if os.environ.get("HODGE_SPECTRA_PURE"):
        raise ImportError("pure backend requested")
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKEND = "compiled" if _ckernels is not None else "python"


def _csc_parts(mat):
    mat = sp.csc_matrix(mat, dtype=np.int64)
    mat.sum_duplicates()
    mat.sort_indices()
    return (
        np.ascontiguousarray(mat.indptr, dtype=np.int64),
        np.ascontiguousarray(mat.indices, dtype=np.int64),
        np.ascontiguousarray(mat.data, dtype=np.int64),
        mat.shape[0],
    )


def independent_columns(mat, backend=None):
    """Mask of columns independent of the columns to their left, over Q."""
    parts = _csc_parts(mat)
    backend = backend or BACKEND
    if backend == "compiled" and _ckernels is not None:
        try:
            return _ckernels.reduce_columns(*parts)
        except OverflowError:
            pass
    return _pykernels.reduce_columns(*parts)


def exact_rank(mat, backend=None):
    """Rank over the rationals of an integer matrix."""
    if mat.shape[0] == 0 or mat.shape[1] == 0:
        return 0
    # reduce along the shorter side
    if mat.shape[1] > mat.shape[0]:
        mat = sp.csc_matrix(mat).T
    return int(independent_columns(mat, backend).sum())


def whitney_local_mass(gram, vols, faces, n, backend=None):
    gram = np.ascontiguousarray(gram, dtype=float)
    vols = np.ascontiguousarray(vols, dtype=float)
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    backend = backend or BACKEND
    if backend == "compiled" and _ckernels is not None and faces.shape[1] <= 8:
        return _ckernels.whitney_local_mass(gram, vols, faces, int(n))
    return _pykernels.whitney_local_mass(gram, vols, faces, n)
