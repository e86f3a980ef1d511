# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CTL / CTC lattice kernels (log space).

Mirrors ``ctlsed._pykernels`` exactly; see that module for the contracts.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()

cdef double NEG_INF = -INFINITY


cdef inline double lse2(double a, double b) nogil:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + log(1.0 + exp(b - a))
    return b + log(1.0 + exp(a - b))


def ctl_lattice(log_eps, log_delta, max_block, bint want_grad=True):
    cdef double[::1] le = np.ascontiguousarray(log_eps, dtype=np.float64)
    cdef double[:, ::1] ld = np.ascontiguousarray(log_delta, dtype=np.float64)
    cdef long[::1] mb = np.ascontiguousarray(max_block, dtype=np.int64)
    cdef Py_ssize_t F = ld.shape[0]
    cdef Py_ssize_t K = ld.shape[1]
    cdef Py_ssize_t t, i, j, r, m, s
    cdef double w, acc, base, ex, log_p
    cdef Py_ssize_t jmax = 0
    for i in range(K + 1):
        if mb[i] > jmax:
            jmax = mb[i]

    la_arr = np.full((F + 1, K + 1), NEG_INF)
    cdef double[:, ::1] la = la_arr
    la[0, 0] = 0.0
    with nogil:
        for t in range(1, F + 1):
            for i in range(K + 1):
                acc = la[t - 1, i]
                w = 0.0
                for j in range(1, mb[i] + 1):
                    w = w + ld[t - 1, i - j]
                    acc = lse2(acc, la[t - 1, i - j] + w)
                if acc == NEG_INF:
                    la[t, i] = NEG_INF
                else:
                    la[t, i] = acc + le[t - 1]
    log_p = la[F, K]
    if not want_grad or log_p == NEG_INF:
        return log_p, None

    lb_arr = np.full((F + 1, K + 1), NEG_INF)
    cdef double[:, ::1] lb = lb_arr
    lb[F, K] = 0.0
    with nogil:
        for t in range(F, 0, -1):
            for i in range(K + 1):
                acc = lb[t, i]
                w = 0.0
                for j in range(1, min(jmax, K - i) + 1):
                    w = w + ld[t - 1, i + j - 1]
                    if mb[i + j] >= j:
                        acc = lse2(acc, lb[t, i + j] + w)
                if acc == NEG_INF:
                    lb[t - 1, i] = NEG_INF
                else:
                    lb[t - 1, i] = acc + le[t - 1]

    occ_arr = np.zeros((F, K))
    cdef double[:, ::1] occ = occ_arr
    with nogil:
        for t in range(1, F + 1):
            for i in range(1, K + 1):
                # blocks ending at state i, starting at state s = i - j
                for j in range(1, mb[i] + 1):
                    s = i - j
                    base = la[t - 1, s] + lb[t, i]
                    if base == NEG_INF:
                        continue
                    base = base + le[t - 1] - log_p
                    for r in range(j):
                        ex = base
                        for m in range(j):
                            if m != r:
                                ex = ex + ld[t - 1, s + m]
                        if ex != NEG_INF:
                            occ[t - 1, s + r] += exp(ex)
    return log_p, occ_arr


def ctc_lattice(log_q, labels, bint want_grad=True):
    cdef double[:, ::1] lq = np.ascontiguousarray(log_q, dtype=np.float64)
    cdef long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t T = lq.shape[0]
    cdef Py_ssize_t S = lq.shape[1]
    cdef Py_ssize_t K = lab.shape[0]
    cdef Py_ssize_t U = 2 * K + 1
    cdef Py_ssize_t t, u
    cdef double acc, log_p

    ext_arr = np.zeros(U, dtype=np.int64)
    skip_arr = np.zeros(U, dtype=np.uint8)
    cdef long[::1] ext = ext_arr
    cdef unsigned char[::1] skip = skip_arr
    for u in range(K):
        ext[2 * u + 1] = lab[u]
        if u > 0 and lab[u] != lab[u - 1]:
            skip[2 * u + 1] = 1

    pre_arr = np.full((T, U), NEG_INF)
    la_arr = np.full((T, U), NEG_INF)
    cdef double[:, ::1] pre = pre_arr
    cdef double[:, ::1] la = la_arr
    with nogil:
        pre[0, 0] = 0.0
        if U > 1:
            pre[0, 1] = 0.0
        for u in range(U):
            la[0, u] = pre[0, u] + lq[0, ext[u]]
        for t in range(1, T):
            for u in range(U):
                acc = la[t - 1, u]
                if u >= 1:
                    acc = lse2(acc, la[t - 1, u - 1])
                if u >= 2 and skip[u]:
                    acc = lse2(acc, la[t - 1, u - 2])
                pre[t, u] = acc
                la[t, u] = acc + lq[t, ext[u]] if acc != NEG_INF else NEG_INF
    if K == 0:
        log_p = la[T - 1, U - 1]
    else:
        log_p = lse2(la[T - 1, U - 1], la[T - 1, U - 2])
    if not want_grad or log_p == NEG_INF:
        return log_p, None

    post_arr = np.full((T, U), NEG_INF)
    cdef double[:, ::1] post = post_arr
    grad_arr = np.zeros((T, S))
    cdef double[:, ::1] grad = grad_arr
    with nogil:
        post[T - 1, U - 1] = 0.0
        if K > 0:
            post[T - 1, U - 2] = 0.0
        for t in range(T - 2, -1, -1):
            for u in range(U):
                acc = post[t + 1, u] + lq[t + 1, ext[u]]
                if u + 1 < U:
                    acc = lse2(acc, post[t + 1, u + 1] + lq[t + 1, ext[u + 1]])
                if u + 2 < U and skip[u + 2]:
                    acc = lse2(acc, post[t + 1, u + 2] + lq[t + 1, ext[u + 2]])
                post[t, u] = acc
        for t in range(T):
            for u in range(U):
                acc = pre[t, u] + post[t, u]
                if acc != NEG_INF:
                    grad[t, ext[u]] += exp(acc - log_p)
    return log_p, grad_arr
