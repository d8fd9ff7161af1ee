# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels: per-node triangles and 4-node orbit counts.

Orbit columns follow the usual graphlet numbering, offset by 4:
0/1 path end/middle, 2/3 star leaf/centre, 4 four-cycle, 5/6/7 paw
tail/base/hub, 8/9 diamond rim/chord, 10 clique.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def triangles(cnp.uint8_t[:, ::1] A):
    cdef Py_ssize_t n = A.shape[0], i, j, k
    out = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] t = out
    for i in range(n):
        for j in range(i + 1, n):
            if not A[i, j]:
                continue
            for k in range(j + 1, n):
                if A[i, k] and A[j, k]:
                    t[i] += 1
                    t[j] += 1
                    t[k] += 1
    return out


cdef inline void _classify(cnp.int64_t[:, ::1] out, Py_ssize_t* v, int* d, int m) nogil:
    cdef int r, dmax = 0, dmin = 4
    for r in range(4):
        if d[r] > dmax:
            dmax = d[r]
        if d[r] < dmin:
            dmin = d[r]
    if m == 3:
        if dmin == 0:
            return  # triangle plus an isolated node
        for r in range(4):
            if dmax == 3:
                out[v[r], 3 if d[r] == 3 else 2] += 1
            else:
                out[v[r], 0 if d[r] == 1 else 1] += 1
    elif m == 4:
        for r in range(4):
            if dmax == 2:
                out[v[r], 4] += 1
            else:
                out[v[r], 4 + d[r]] += 1
    elif m == 5:
        for r in range(4):
            out[v[r], 8 if d[r] == 2 else 9] += 1
    elif m == 6:
        for r in range(4):
            out[v[r], 10] += 1


def orbit4(cnp.uint8_t[:, ::1] A):
    cdef Py_ssize_t n = A.shape[0], i, j, k, l
    out = np.zeros((n, 11), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    cdef Py_ssize_t v[4]
    cdef int d[4]
    cdef int ij, ik, jk, il, jl, kl, m3, m
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                ij = A[i, j]
                for k in range(j + 1, n):
                    ik = A[i, k]
                    jk = A[j, k]
                    m3 = ij + ik + jk
                    for l in range(k + 1, n):
                        il = A[i, l]
                        jl = A[j, l]
                        kl = A[k, l]
                        m = m3 + il + jl + kl
                        if m < 3:
                            continue
                        v[0] = i
                        v[1] = j
                        v[2] = k
                        v[3] = l
                        d[0] = ij + ik + il
                        d[1] = ij + jk + jl
                        d[2] = ik + jk + kl
                        d[3] = il + jl + kl
                        _classify(o, v, d, m)
    return out
