# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel for the smoothed max-min ascent on unit-column factors.

Maximizes min_k [Re tr(M_k Y^H Y) + offs_k] over factors Y whose columns have
unit norm (so V = Y^H Y is PSD with unit diagonal), by log-sum-exp smoothed
gradient ascent with a backtracking line search on the oblique manifold.

Factors are held column-major internally (C[i, a] = Y[a, i]); the Gram matrix
and the ascent direction go through BLAS zgemm, everything else is plain
loops. Same contract as irsmiso._ascent_py.lse_ascent; selected at import in
irsmiso.maxmin_sdp.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt, fabs
from scipy.linalg.cython_blas cimport zgemm

cnp.import_array()

cdef double complex Z_ONE = 1.0
cdef double complex Z_ZERO = 0.0


cdef void _gram_conj(double complex[:, ::1] C, double complex[:, ::1] W) noexcept nogil:
    """W[i, j] = conj(y_i^H y_j) for factor columns stored in the rows of C."""
    cdef int n = <int> C.shape[0], r = <int> C.shape[1]
    # Fortran view of C is C^T (r x n); (C^T)^H C^T = conj(V^T), whose
    # row-major reading is conj(V).
    zgemm("C", "N", &n, &n, &r, &Z_ONE, &C[0, 0], &r, &C[0, 0], &r,
          &Z_ZERO, &W[0, 0], &n)


cdef double _tvals(double complex[:, :, ::1] Ms, double[::1] offs,
                   double complex[:, ::1] C, double complex[:, ::1] W,
                   double[::1] t) noexcept nogil:
    """t_k = Re tr(M_k Y^H Y) + offs_k; W receives the conjugated Gram."""
    cdef Py_ssize_t K = Ms.shape[0], n = Ms.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double tk, tmin = 0.0
    _gram_conj(C, W)
    # tr(M V) = sum_i M_ii V_ii + 2 sum_{i<j} Re(M_ij V_ji), V_ji = W[i, j]
    for k in range(K):
        tk = 0.0
        for i in range(n):
            tk += Ms[k, i, i].real * W[i, i].real
            for j in range(i + 1, n):
                tk += 2.0 * (Ms[k, i, j].real * W[i, j].real
                             - Ms[k, i, j].imag * W[i, j].imag)
        t[k] = tk + offs[k]
        if k == 0 or t[k] < tmin:
            tmin = t[k]
    return tmin


cdef double _lse(double[::1] t, double T) noexcept nogil:
    """Smoothed minimum: m - T log sum exp(-(t_k - m)/T)."""
    cdef Py_ssize_t K = t.shape[0], k
    cdef double m = t[0], s = 0.0
    for k in range(1, K):
        if t[k] < m:
            m = t[k]
    for k in range(K):
        s += exp(-(t[k] - m) / T)
    return m - T * log(s)


cdef void _colnormalize(double complex[:, ::1] C) noexcept nogil:
    cdef Py_ssize_t n = C.shape[0], r = C.shape[1], i, a
    cdef double nrm
    for i in range(n):
        nrm = 0.0
        for a in range(r):
            nrm += C[i, a].real ** 2 + C[i, a].imag ** 2
        if nrm <= 0.0:
            C[i, 0] = 1.0
            continue
        nrm = 1.0 / sqrt(nrm)
        for a in range(r):
            C[i, a] = C[i, a] * nrm


def lse_ascent(double complex[:, :, ::1] Ms, double[::1] offs,
               cnp.ndarray[cnp.complex128_t, ndim=2] Y0,
               double[::1] temps, int max_iter, double tol, int patience,
               double alpha0):
    cdef Py_ssize_t K = Ms.shape[0]
    cdef int n = <int> Ms.shape[1], r = <int> Y0.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] C_arr = \
        np.ascontiguousarray(Y0.T.copy())
    cdef double complex[:, ::1] C = C_arr
    cdef double complex[:, ::1] Cb = C_arr.copy()
    cdef double complex[:, ::1] Ct = C_arr.copy()
    cdef double complex[:, ::1] W = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] D = np.empty((n, r), dtype=np.complex128)
    cdef double complex[:, ::1] G = np.empty((n, n), dtype=np.complex128)
    cdef double[::1] t = np.empty(K, dtype=np.float64)
    cdef double[::1] tt = np.empty(K, dtype=np.float64)
    cdef double[::1] w = np.empty(K, dtype=np.float64)

    cdef double best, alpha = alpha0, f0, f1, fmin, m, ws, gn, ss, ip
    cdef double complex g
    cdef Py_ssize_t it = 0, si, k, a, i, j, ls
    cdef int stall, accepted

    with nogil:
        _colnormalize(C)
        best = _tvals(Ms, offs, C, W, t)
        for i in range(n):
            for a in range(r):
                Cb[i, a] = C[i, a]

        for si in range(temps.shape[0]):
            for i in range(n):
                for a in range(r):
                    C[i, a] = Cb[i, a]
            _tvals(Ms, offs, C, W, t)
            f0 = _lse(t, temps[si])
            stall = 0
            while it < max_iter:
                it += 1
                # softmin weights
                m = t[0]
                for k in range(1, K):
                    if t[k] < m:
                        m = t[k]
                ws = 0.0
                for k in range(K):
                    w[k] = exp(-(t[k] - m) / temps[si])
                    ws += w[k]
                # G = sum_k w_k M_k (Hermitian)
                for i in range(n):
                    for j in range(n):
                        g = 0
                        for k in range(K):
                            g = g + (w[k] / ws) * Ms[k, i, j]
                        G[i, j] = g
                # ascent direction D^T = C^T G: column j of D = sum_i y_i G_ij
                zgemm("N", "T", &r, &n, &n, &Z_ONE, &C[0, 0], &r,
                      &G[0, 0], &n, &Z_ZERO, &D[0, 0], &r)
                # tangent projection per column, gradient norm
                gn = 0.0
                for j in range(n):
                    ip = 0.0
                    for a in range(r):
                        ip += (C[j, a].real * D[j, a].real
                               + C[j, a].imag * D[j, a].imag)
                    for a in range(r):
                        D[j, a] = D[j, a] - ip * C[j, a]
                        gn += D[j, a].real ** 2 + D[j, a].imag ** 2
                gn = sqrt(gn)
                if gn < 1e-300:
                    break
                ss = sqrt(<double> n) / gn
                accepted = 0
                for ls in range(40):
                    for j in range(n):
                        for a in range(r):
                            Ct[j, a] = C[j, a] + alpha * ss * D[j, a]
                    _colnormalize(Ct)
                    fmin = _tvals(Ms, offs, Ct, W, tt)
                    f1 = _lse(tt, temps[si])
                    if f1 > f0:
                        accepted = 1
                        break
                    alpha *= 0.5
                    if alpha < 1e-18:
                        break
                if not accepted:
                    break
                for j in range(n):
                    for a in range(r):
                        C[j, a] = Ct[j, a]
                for k in range(K):
                    t[k] = tt[k]
                f0 = f1
                alpha = alpha * 1.3
                if alpha > 1e3:
                    alpha = 1e3
                if fmin > best + tol * (1.0 + fabs(best)):
                    best = fmin
                    for i in range(n):
                        for a in range(r):
                            Cb[i, a] = C[i, a]
                    stall = 0
                else:
                    stall += 1
                    if stall > patience:
                        break

    return np.asarray(Cb).T.copy(), best, int(it)
