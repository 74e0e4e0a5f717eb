# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; behaviour mirrors ``_kernels_py`` row by row."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


cdef inline double _soft(double v, double lam) nogil:
    if v > lam:
        return v - lam
    if v < -lam:
        return v + lam
    return 0.0


cdef double _row_kkt(double[::1] b, double[::1] q, double lam, Py_ssize_t d) nogil:
    cdef double r = 0.0, t
    cdef Py_ssize_t j
    for j in range(d):
        if b[j] > 0:
            t = fabs(q[j] - lam)
        elif b[j] < 0:
            t = fabs(q[j] + lam)
        else:
            t = fabs(q[j]) - lam
        if t > r:
            r = t
    return r


cdef void _refresh(double[:, ::1] G, double[::1] c, double[::1] b, double[::1] q, Py_ssize_t d) nogil:
    cdef Py_ssize_t j, k
    cdef double s
    for j in range(d):
        s = c[j]
        for k in range(d):
            if b[k] != 0.0:
                s -= G[k, j] * b[k]
        q[j] = s


def lasso_cd(G, C, double lam, beta0, double tol, long max_sweeps):
    cdef double[:, ::1] Gv = np.ascontiguousarray(G, dtype=np.float64)
    cdef double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    beta = np.array(beta0, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] B = beta
    cdef Py_ssize_t N = B.shape[0], d = B.shape[1]
    conv = np.zeros(N, dtype=bool)
    cdef cnp.uint8_t[::1] cv = conv.view(np.uint8)
    cdef double[::1] q = np.empty(d)
    cdef double[::1] diag = np.empty(d)
    cdef Py_ssize_t i, j, k
    cdef long sweeps, most = 0
    cdef double old, v, new, delta
    for j in range(d):
        diag[j] = Gv[j, j]
    with nogil:
        for i in range(N):
            _refresh(Gv, Cv[i], B[i], q, d)
            sweeps = 0
            while _row_kkt(B[i], q, lam, d) > tol and sweeps < max_sweeps:
                sweeps += 1
                for j in range(d):
                    old = B[i, j]
                    v = q[j] + diag[j] * old
                    new = _soft(v, lam) / diag[j]
                    delta = new - old
                    if delta != 0.0:
                        B[i, j] = new
                        for k in range(d):
                            q[k] -= delta * Gv[j, k]
                _refresh(Gv, Cv[i], B[i], q, d)
            if _row_kkt(B[i], q, lam, d) <= tol:
                cv[i] = 1
            if sweeps > most:
                most = sweeps
    return beta, int(most), conv


def weighted_l2_prox(c, k, tau, double rtol=1e-12, long max_iter=400):
    cdef double[:, ::1] cv = np.ascontiguousarray(np.atleast_2d(c), dtype=np.float64)
    cdef double[::1] kv = np.ascontiguousarray(k, dtype=np.float64)
    cdef Py_ssize_t N = cv.shape[0], p = cv.shape[1]
    cdef double[::1] tv = np.array(np.broadcast_to(np.asarray(tau, dtype=np.float64), (N,)))
    out = np.empty((N, p))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    cdef long it
    cdef double s, lo, hi, g, t, w, q, dq, phi, alpha, nxt
    with nogil:
        for i in range(N):
            s = 0.0
            for j in range(p):
                if kv[j] > 0:
                    t = cv[i, j] / kv[j]
                    s += t * t
            if sqrt(s) <= tv[i]:
                for j in range(p):
                    ov[i, j] = 0.0 if kv[j] > 0 else cv[i, j]
                continue
            s = 0.0
            for j in range(p):
                t = kv[j] * cv[i, j]
                s += t * t
            lo = 0.0
            hi = sqrt(s) / tv[i]
            alpha = 0.0
            for it in range(max_iter):
                # Newton on phi(a) = 1/|w(a)| - 1/tau, w_j = k_j c_j / (k_j^2 + a)
                q = 0.0
                dq = 0.0
                for j in range(p):
                    if kv[j] > 0:
                        g = kv[j] * kv[j] + alpha
                        w = kv[j] * cv[i, j] / g
                        q += w * w
                        dq += w * w / g
                phi = 1.0 / sqrt(q) - 1.0 / tv[i]
                if phi < 0:
                    lo = alpha
                else:
                    hi = alpha
                if hi - lo <= rtol * hi or dq == 0:
                    break
                nxt = alpha - phi * q * sqrt(q) / dq
                if not (lo < nxt < hi):
                    nxt = 0.5 * (lo + hi)
                if fabs(nxt - alpha) <= rtol * nxt:
                    alpha = nxt
                    break
                alpha = nxt
            for j in range(p):
                ov[i, j] = cv[i, j] * alpha / (kv[j] * kv[j] + alpha)
    return out
