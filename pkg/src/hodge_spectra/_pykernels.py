"""Pure-Python/numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels`` mirrors their signatures and
results exactly. Integer arithmetic here uses Python ints, so it never
overflows.
"""
from __future__ import annotations

from itertools import product
from math import factorial, gcd

import numpy as np


def reduce_columns(indptr, indices, data, n_rows):
    """Fraction-free column reduction of a sparse integer matrix (CSC layout).

    Columns are processed left to right. Each column is reduced against the
    previously kept columns by eliminating its lowest nonzero row, multiplying
    through instead of dividing, then removing the content (gcd of entries).

    Returns a boolean mask, ``True`` for columns that are linearly independent
    of all columns to their left over the rationals. Its sum is the rank.
    """
    indptr = np.asarray(indptr)
    indices = np.asarray(indices)
    data = np.asarray(data)
    n_cols = len(indptr) - 1
    pivots = {}
    keep = np.zeros(n_cols, dtype=bool)
    for j in range(n_cols):
        col = {}
        for k in range(indptr[j], indptr[j + 1]):
            v = int(data[k])
            if v:
                r = int(indices[k])
                col[r] = col.get(r, 0) + v
        col = {r: v for r, v in col.items() if v}
        while col:
            low = max(col)
            piv = pivots.get(low)
            if piv is None:
                g = 0
                for v in col.values():
                    g = gcd(g, v)
                if col[low] < 0:
                    g = -g
                pivots[low] = {r: v // g for r, v in col.items()}
                keep[j] = True
                break
            a = piv[low]
            b = col[low]
            new = {r: a * v for r, v in col.items()}
            for r, v in piv.items():
                w = new.get(r, 0) - b * v
                if w:
                    new[r] = w
                else:
                    new.pop(r, None)
            g = 0
            for v in new.values():
                g = gcd(g, v)
            if g > 1:
                new = {r: v // g for r, v in new.items()}
            col = new
    return keep


def whitney_local_mass(gram, vols, faces, n):
    """Element mass matrices of lowest-order Whitney p-forms.

    Parameters
    ----------
    gram : (T, n+1, n+1) array
        Inner products of barycentric coordinate gradients per element.
    vols : (T,) array
        Element volumes.
    faces : (F, p+1) int array
        Local vertex indices (ascending) of the p-faces of one element.
    n : int
        Element dimension.

    Returns
    -------
    (T, F, F) array of integrals of ``<W_s, W_t>`` over each element.
    """
    gram = np.asarray(gram, dtype=float)
    vols = np.asarray(vols, dtype=float)
    faces = np.asarray(faces, dtype=np.int64)
    n_el = gram.shape[0]
    nf, pp1 = faces.shape
    p = pp1 - 1
    scale = float(factorial(p)) ** 2
    # integral of lambda_a * lambda_b over the element, per unit volume
    bary = (np.ones((n + 1, n + 1)) + np.eye(n + 1)) / ((n + 1) * (n + 2))
    out = np.zeros((n_el, nf, nf))
    for s, t in product(range(nf), repeat=2):
        if t < s:
            out[:, s, t] = out[:, t, s]
            continue
        fs, ft = faces[s], faces[t]
        acc = np.zeros(n_el)
        for k, l in product(range(pp1), repeat=2):
            rest_s = np.delete(fs, k)
            rest_t = np.delete(ft, l)
            if p == 0:
                det = np.ones(n_el)
            else:
                det = np.linalg.det(gram[:, rest_s][:, :, rest_t])
            sign = -1.0 if (k + l) % 2 else 1.0
            acc += sign * bary[fs[k], ft[l]] * det
        out[:, s, t] = scale * acc * vols
    return out
