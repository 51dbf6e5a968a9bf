# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; see ``_fallback.py`` for the reference semantics."""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, log1p, sqrt, NAN

cnp.import_array()

DEF REFRESH = 1024


cdef inline double _softplus(double t) noexcept nogil:
    if t > 0:
        return t + log1p(exp(-t))
    return log1p(exp(t))


def enum_log_sum(A, a, d):
    """Gray-code enumeration: each step flips one bit and updates the
    pre-activations by one row of A; pre-activations are recomputed from
    scratch every 1024 steps to bound drift."""
    cdef double[:, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n = Av.shape[0], m = Av.shape[1]
    cdef double[::1] pre = np.empty(m, dtype=np.float64)
    cdef unsigned char[::1] s = np.zeros(n, dtype=np.uint8)
    cdef unsigned long long total = 1ULL << n, k, g
    cdef Py_ssize_t i, j, flip
    cdef double lin = 0.0, val, run_max = -1e308, run_sum = 0.0
    with nogil:
        for k in range(total):
            if k % REFRESH == 0:
                g = k ^ (k >> 1)
                lin = 0.0
                for j in range(m):
                    pre[j] = dv[j]
                for i in range(n):
                    s[i] = (g >> i) & 1
                    if s[i]:
                        lin += av[i]
                        for j in range(m):
                            pre[j] += Av[i, j]
            else:
                # bit that changes between gray(k-1) and gray(k)
                flip = 0
                g = k
                while (g & 1) == 0:
                    g >>= 1
                    flip += 1
                if s[flip]:
                    s[flip] = 0
                    lin -= av[flip]
                    for j in range(m):
                        pre[j] -= Av[flip, j]
                else:
                    s[flip] = 1
                    lin += av[flip]
                    for j in range(m):
                        pre[j] += Av[flip, j]
            val = lin
            for j in range(m):
                val += _softplus(pre[j])
            if val > run_max:
                run_sum = run_sum * exp(run_max - val) + 1.0
                run_max = val
            else:
                run_sum += exp(val - run_max)
    return float(run_max + log(run_sum))


def group_coefficients(P, order, offsets, double eps):
    cdef double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef cnp.int64_t[::1] ov = np.ascontiguousarray(order, dtype=np.int64)
    cdef cnp.int64_t[::1] offv = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t L = Pv.shape[0], H = Pv.shape[1], K = offv.shape[0] - 1
    coef_arr = np.empty((L, H), dtype=np.float64)
    pen_arr = np.empty(L, dtype=np.float64)
    cdef double[:, ::1] cv = coef_arr
    cdef double[::1] pv = pen_arr
    cdef Py_ssize_t l, k, t, j
    cdef double acc, norm, denom, p, total
    with nogil:
        for l in range(L):
            total = 0.0
            for k in range(K):
                acc = 0.0
                for t in range(offv[k], offv[k + 1]):
                    p = Pv[l, ov[t]]
                    acc += p * p
                norm = sqrt(acc)
                total += norm
                denom = norm if norm > eps else eps
                for t in range(offv[k], offv[k + 1]):
                    j = ov[t]
                    p = Pv[l, j]
                    cv[l, j] = p * p * (1.0 - p) / denom
            pv[l] = total
    return coef_arr, pen_arr


def hoyer_rows(X):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t L = Xv.shape[0], D = Xv.shape[1], l, i
    out_arr = np.empty(L, dtype=np.float64)
    cdef double[::1] ov = out_arr
    cdef double l1, l2, v, m, sqrt_d = sqrt(<double>D), r
    with nogil:
        for l in range(L):
            m = 0.0
            for i in range(D):
                v = fabs(Xv[l, i])
                if v > m:
                    m = v
            l1 = 0.0
            l2 = 0.0
            if m > 0.0:
                for i in range(D):
                    v = fabs(Xv[l, i]) / m
                    l1 += v
                    l2 += v * v
            if l2 == 0.0 or D < 2:
                ov[l] = NAN
                continue
            r = (sqrt_d - l1 / sqrt(l2)) / (sqrt_d - 1.0)
            if r < 0.0:
                r = 0.0
            elif r > 1.0:
                r = 1.0
            ov[l] = r
    return out_arr
