# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Monte Carlo inner kernels (same contracts as ``_pykernels``).

Complex data are copied into split real/imaginary scratch buffers laid out
so that every inner loop runs over contiguous memory.
"""
import numpy as np

from libc.math cimport sqrt

ctypedef double complex cplx


def zf_batch(const cplx[:, :, ::1] H, double rtol=1e-12):
    """Unit-norm zero-forcing directions; see ``_pykernels.zf_batch``."""
    cdef Py_ssize_t n = H.shape[0], D = H.shape[1], K = H.shape[2]
    out = np.zeros((n, D, K), dtype=np.complex128)
    ok = np.ones(n, dtype=bool)
    cdef cplx[:, :, ::1] W = out
    cdef unsigned char[::1] okv = ok.view(np.uint8)
    # Q columns stored as rows: qr[j, i], qi[j, i]
    cdef double[:, ::1] qr = np.empty((K, D))
    cdef double[:, ::1] qi = np.empty((K, D))
    cdef double[:, ::1] rr = np.empty((K, K))
    cdef double[:, ::1] ri = np.empty((K, K))
    cdef double[:, ::1] yr = np.empty((K, K))
    cdef double[:, ::1] yi = np.empty((K, K))
    cdef double[::1] wr = np.empty(D)
    cdef double[::1] wi = np.empty(D)
    cdef Py_ssize_t t, i, j, k, a, b, c, rep
    cdef double sr, si, nrm, col, ar, ai, br, bi, d
    cdef bint good

    with nogil:
        for t in range(n):
            for i in range(D):
                for j in range(K):
                    qr[j, i] = H[t, i, j].real
                    qi[j, i] = H[t, i, j].imag
            good = True
            # QR by classical Gram-Schmidt with one reorthogonalization pass
            for j in range(K):
                col = 0.0
                for i in range(D):
                    col += qr[j, i] * qr[j, i] + qi[j, i] * qi[j, i]
                col = sqrt(col)
                for k in range(K):
                    rr[k, j] = 0.0
                    ri[k, j] = 0.0
                for rep in range(2):
                    for k in range(j):
                        sr = 0.0
                        si = 0.0
                        for i in range(D):
                            # conj(q_k) * q_j
                            sr += qr[k, i] * qr[j, i] + qi[k, i] * qi[j, i]
                            si += qr[k, i] * qi[j, i] - qi[k, i] * qr[j, i]
                        rr[k, j] += sr
                        ri[k, j] += si
                        for i in range(D):
                            ar = qr[k, i]
                            ai = qi[k, i]
                            qr[j, i] -= sr * ar - si * ai
                            qi[j, i] -= sr * ai + si * ar
                nrm = 0.0
                for i in range(D):
                    nrm += qr[j, i] * qr[j, i] + qi[j, i] * qi[j, i]
                nrm = sqrt(nrm)
                if not nrm > rtol * col:
                    good = False
                    break
                rr[j, j] = nrm
                ri[j, j] = 0.0
                for i in range(D):
                    qr[j, i] /= nrm
                    qi[j, i] /= nrm
            if not good:
                okv[t] = 0
                continue
            # Y = R^{-H} (lower triangular), forward substitution per column
            for c in range(K):
                for a in range(c):
                    yr[a, c] = 0.0
                    yi[a, c] = 0.0
                for a in range(c, K):
                    sr = 1.0 if a == c else 0.0
                    si = 0.0
                    for b in range(c, a):
                        # conj(R[b, a]) * Y[b, c]
                        br = rr[b, a]
                        bi = -ri[b, a]
                        sr -= br * yr[b, c] - bi * yi[b, c]
                        si -= br * yi[b, c] + bi * yr[b, c]
                    d = rr[a, a]
                    yr[a, c] = sr / d
                    yi[a, c] = si / d
            # W = Q Y, columns normalized
            for c in range(K):
                for i in range(D):
                    wr[i] = 0.0
                    wi[i] = 0.0
                for a in range(c, K):
                    br = yr[a, c]
                    bi = yi[a, c]
                    for i in range(D):
                        wr[i] += qr[a, i] * br - qi[a, i] * bi
                        wi[i] += qr[a, i] * bi + qi[a, i] * br
                nrm = 0.0
                for i in range(D):
                    nrm += wr[i] * wr[i] + wi[i] * wi[i]
                nrm = sqrt(nrm)
                for i in range(D):
                    W[t, i, c].real = wr[i] / nrm
                    W[t, i, c].imag = wi[i] / nrm
    return out, ok


def sinr_batch(const cplx[:, :, ::1] H, const cplx[:, :, ::1] P,
               const double[::1] power, double noise):
    """Per-user SINR; see ``_pykernels.sinr_batch``."""
    cdef Py_ssize_t n = H.shape[0], D = H.shape[1], K = H.shape[2]
    out = np.empty((n, K), dtype=np.float64)
    cdef double[:, ::1] S = out
    # G[q, j] = conj(h_q)^T p_j accumulated row by row over the stacked dimension
    cdef double[:, ::1] gr = np.empty((K, K))
    cdef double[:, ::1] gi = np.empty((K, K))
    cdef Py_ssize_t t, q, j, i
    cdef double hr, hi, pr, pi, sig, intf, p
    with nogil:
        for t in range(n):
            for q in range(K):
                for j in range(K):
                    gr[q, j] = 0.0
                    gi[q, j] = 0.0
            for i in range(D):
                for q in range(K):
                    hr = H[t, i, q].real
                    hi = -H[t, i, q].imag
                    for j in range(K):
                        pr = P[t, i, j].real
                        pi = P[t, i, j].imag
                        gr[q, j] += hr * pr - hi * pi
                        gi[q, j] += hr * pi + hi * pr
            p = power[t]
            for q in range(K):
                sig = 0.0
                intf = 0.0
                for j in range(K):
                    if j == q:
                        sig = gr[q, j] * gr[q, j] + gi[q, j] * gi[q, j]
                    else:
                        intf += gr[q, j] * gr[q, j] + gi[q, j] * gi[q, j]
                S[t, q] = p * sig / (noise + p * intf)
    return out
