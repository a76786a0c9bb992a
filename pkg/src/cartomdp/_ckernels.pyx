# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (see _pykernels for the contract)."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()

cdef int64_t INF = (<int64_t>1) << 62


def minplus_matmul(a, b):
    cdef int64_t[:, ::1] A = np.ascontiguousarray(a, dtype=np.int64)
    cdef int64_t[:, ::1] B = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], p = B.shape[1]
    out = np.full((n, p), INF, dtype=np.int64)
    cdef int64_t[:, ::1] O = out
    cdef Py_ssize_t i, k, j
    cdef int64_t aik, v
    for i in range(n):
        for k in range(m):
            aik = A[i, k]
            if aik >= INF:
                continue
            for j in range(p):
                if B[k, j] >= INF:
                    continue
                v = aik + B[k, j]
                if v < O[i, j]:
                    O[i, j] = v
    return out


def tree_eval_grad(var_ptr, child_ptr, child, prob, x, leaf_p, leaf_q):
    cdef int64_t[::1] vptr = np.ascontiguousarray(var_ptr, dtype=np.int64)
    cdef int64_t[::1] cptr = np.ascontiguousarray(child_ptr, dtype=np.int64)
    cdef int64_t[::1] ch = np.ascontiguousarray(child, dtype=np.int64)
    cdef double[::1] pr = np.ascontiguousarray(prob, dtype=np.float64)
    cdef double[::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t m = vptr.shape[0] - 1
    cdef Py_ssize_t nvar = xs.shape[0]
    vp_arr = np.array(leaf_p, dtype=np.float64, copy=True)
    vq_arr = np.array(leaf_q, dtype=np.float64, copy=True)
    cdef double[::1] vp = vp_arr
    cdef double[::1] vq = vq_arr
    sp_arr = np.zeros(nvar)
    sq_arr = np.zeros(nvar)
    gp_arr = np.zeros(nvar)
    gq_arr = np.zeros(nvar)
    reach_arr = np.zeros(m)
    cdef double[::1] sp = sp_arr
    cdef double[::1] sq = sq_arr
    cdef double[::1] gp = gp_arr
    cdef double[::1] gq = gq_arr
    cdef double[::1] reach = reach_arr
    cdef Py_ssize_t v, j, c
    cdef double tp, tq, ap, aq, w, r, rx
    for v in range(m - 1, -1, -1):
        if vptr[v] == vptr[v + 1]:
            continue
        tp = 0.0
        tq = 0.0
        for j in range(vptr[v], vptr[v + 1]):
            ap = 0.0
            aq = 0.0
            for c in range(cptr[j], cptr[j + 1]):
                w = pr[c]
                ap += w * vp[ch[c]]
                aq += w * vq[ch[c]]
            sp[j] = ap
            sq[j] = aq
            tp += xs[j] * ap
            tq += xs[j] * aq
        vp[v] = tp
        vq[v] = tq
    if m == 0:
        return 0.0, 0.0, gp_arr, gq_arr
    reach[0] = 1.0
    for v in range(m):
        r = reach[v]
        for j in range(vptr[v], vptr[v + 1]):
            gp[j] = r * sp[j]
            gq[j] = r * sq[j]
            rx = r * xs[j]
            for c in range(cptr[j], cptr[j + 1]):
                reach[ch[c]] += rx * pr[c]
    return vp[0], vq[0], gp_arr, gq_arr
