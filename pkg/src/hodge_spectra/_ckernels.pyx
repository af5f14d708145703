# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled versions of the hot kernels in ``_pykernels``.

Same signatures, same results. The integer reduction runs on int64 and raises
OverflowError when an intermediate could leave the safe range; the caller
retries with the Python-int fallback.
"""
from libcpp.vector cimport vector
from libc.stdint cimport int64_t
from libc.math cimport fabs

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef int64_t SAFE = (<int64_t>1) << 30
MAX_P = 8


cdef inline int64_t _abs(int64_t a) nogil:
    return -a if a < 0 else a


cdef inline int64_t _gcd(int64_t a, int64_t b) nogil:
    a = _abs(a)
    b = _abs(b)
    while b:
        a, b = b, a % b
    return a


cdef int _normalize(vector[int64_t]& vals) nogil:
    cdef int64_t g = 0
    cdef size_t i
    for i in range(vals.size()):
        g = _gcd(g, vals[i])
        if g == 1:
            break
    if vals.size() and vals.back() < 0:
        g = -g
    if g != 1 and g != 0:
        for i in range(vals.size()):
            vals[i] = vals[i] // g
    return 0


def reduce_columns(const int64_t[::1] indptr, const int64_t[::1] indices,
                   const int64_t[::1] data, Py_ssize_t n_rows):
    cdef Py_ssize_t n_cols = indptr.shape[0] - 1
    cdef vector[vector[int64_t]] piv_rows
    cdef vector[vector[int64_t]] piv_vals
    cdef vector[int64_t] slot
    cdef vector[int64_t] cur_r, cur_v, new_r, new_v
    cdef Py_ssize_t j, k
    cdef int64_t low, s, a, b, w, amax
    cdef size_t ia, ib, m
    cdef bint overflow = False
    keep_arr = np.zeros(n_cols, dtype=np.uint8)
    cdef unsigned char[::1] keep = keep_arr
    slot.assign(n_rows, -1)

    with nogil:
        for j in range(n_cols):
            cur_r.clear()
            cur_v.clear()
            for k in range(indptr[j], indptr[j + 1]):
                if data[k] != 0:
                    cur_r.push_back(indices[k])
                    cur_v.push_back(data[k])
            while cur_r.size() > 0:
                low = cur_r.back()
                s = slot[low]
                if s < 0:
                    _normalize(cur_v)
                    slot[low] = piv_rows.size()
                    piv_rows.push_back(cur_r)
                    piv_vals.push_back(cur_v)
                    keep[j] = 1
                    break
                a = piv_vals[s].back()
                b = cur_v.back()
                amax = _abs(a) if _abs(a) > _abs(b) else _abs(b)
                if amax >= SAFE:
                    overflow = True
                    break
                for m in range(cur_v.size()):
                    if _abs(cur_v[m]) >= SAFE:
                        overflow = True
                for m in range(piv_vals[s].size()):
                    if _abs(piv_vals[s][m]) >= SAFE:
                        overflow = True
                if overflow:
                    break
                new_r.clear()
                new_v.clear()
                ia = 0
                ib = 0
                # merge a*cur - b*piv, both sorted by row
                while ia < cur_r.size() or ib < piv_rows[s].size():
                    if ib >= piv_rows[s].size() or (ia < cur_r.size() and cur_r[ia] < piv_rows[s][ib]):
                        new_r.push_back(cur_r[ia])
                        new_v.push_back(a * cur_v[ia])
                        ia += 1
                    elif ia >= cur_r.size() or piv_rows[s][ib] < cur_r[ia]:
                        new_r.push_back(piv_rows[s][ib])
                        new_v.push_back(-b * piv_vals[s][ib])
                        ib += 1
                    else:
                        w = a * cur_v[ia] - b * piv_vals[s][ib]
                        if w != 0:
                            new_r.push_back(cur_r[ia])
                            new_v.push_back(w)
                        ia += 1
                        ib += 1
                _normalize_content(new_v)
                cur_r.swap(new_r)
                cur_v.swap(new_v)
            if overflow:
                break
    if overflow:
        raise OverflowError("int64 range exceeded during column reduction")
    return keep_arr.astype(bool)


cdef int _normalize_content(vector[int64_t]& vals) nogil:
    # content removal only; sign fixed when the column becomes a pivot
    cdef int64_t g = 0
    cdef size_t i
    for i in range(vals.size()):
        g = _gcd(g, vals[i])
        if g == 1:
            return 0
    if g > 1:
        for i in range(vals.size()):
            vals[i] = vals[i] // g
    return 0


cdef double _det(double* a, int m) nogil:
    # in-place LU with partial pivoting on an m x m row-major buffer
    cdef int i, r, c, piv
    cdef double d = 1.0, t, f
    for c in range(m):
        piv = c
        for r in range(c + 1, m):
            if fabs(a[r * m + c]) > fabs(a[piv * m + c]):
                piv = r
        if a[piv * m + c] == 0.0:
            return 0.0
        if piv != c:
            for i in range(m):
                t = a[c * m + i]
                a[c * m + i] = a[piv * m + i]
                a[piv * m + i] = t
            d = -d
        d *= a[c * m + c]
        for r in range(c + 1, m):
            f = a[r * m + c] / a[c * m + c]
            for i in range(c + 1, m):
                a[r * m + i] -= f * a[c * m + i]
    return d


def whitney_local_mass(const double[:, :, ::1] gram, const double[::1] vols,
                       const int64_t[:, ::1] faces, int n):
    cdef Py_ssize_t n_el = gram.shape[0]
    cdef Py_ssize_t nf = faces.shape[0]
    cdef int pp1 = faces.shape[1]
    cdef int p = pp1 - 1
    cdef Py_ssize_t e, s, t
    cdef int k, l, i, ii, jj, ri, rj
    cdef double scale = 1.0, acc, sign, bary, den
    cdef double buf[64]
    cdef int rs[8]
    cdef int rt[8]
    if p >= MAX_P:
        raise ValueError("form degree too large for compiled kernel")
    for i in range(2, p + 1):
        scale *= i
    scale *= scale
    den = (n + 1.0) * (n + 2.0)
    out_arr = np.zeros((n_el, nf, nf))
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for e in range(n_el):
            for s in range(nf):
                for t in range(s, nf):
                    acc = 0.0
                    for k in range(pp1):
                        ri = 0
                        for i in range(pp1):
                            if i != k:
                                rs[ri] = faces[s, i]
                                ri += 1
                        for l in range(pp1):
                            rj = 0
                            for i in range(pp1):
                                if i != l:
                                    rt[rj] = faces[t, i]
                                    rj += 1
                            for ii in range(p):
                                for jj in range(p):
                                    buf[ii * p + jj] = gram[e, rs[ii], rt[jj]]
                            bary = (2.0 if faces[s, k] == faces[t, l] else 1.0) / den
                            sign = -1.0 if (k + l) % 2 else 1.0
                            acc += sign * bary * (_det(buf, p) if p > 0 else 1.0)
                    out[e, s, t] = scale * acc * vols[e]
                    out[e, t, s] = out[e, s, t]
    return out_arr
