# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: multinomial series, contour node sums, L1 Caputo."""
import numpy as np
cimport numpy as cnp
from libc.math cimport lgamma, exp, log, cos, sin, atan2, fabs, pow, tgamma, INFINITY

cnp.import_array()

DEF MAXM = 16


cdef struct _Acc:
    double re
    double im
    double level


cdef void _walk(int j, int remaining, int m, double logmag, double phase,
                double shift, const double* logz, const double* argz,
                const int* zero, const double* rho_p, const double* lf,
                _Acc* acc) noexcept nogil:
    cdef int kj, lo
    cdef double mag, lm, ph, sh
    if j == m - 1:
        kj = remaining
        if kj > 0 and zero[j]:
            return
        lm = logmag
        ph = phase
        sh = shift
        if kj > 0:
            lm += kj * logz[j] - lf[kj]
            ph += kj * argz[j]
            sh += rho_p[j] * kj
        mag = exp(lm - lgamma(sh))
        acc.re += mag * cos(ph)
        acc.im += mag * sin(ph)
        acc.level += mag
        return
    kj = remaining
    while kj >= 0:
        if kj > 0 and zero[j]:
            kj -= 1
            continue
        if kj > 0:
            _walk(j + 1, remaining - kj, m, logmag + kj * logz[j] - lf[kj],
                  phase + kj * argz[j], shift + rho_p[j] * kj,
                  logz, argz, zero, rho_p, lf, acc)
        else:
            _walk(j + 1, remaining, m, logmag, phase, shift,
                  logz, argz, zero, rho_p, lf, acc)
        kj -= 1


cdef int _series_one(const double complex* z, int m, const double* rho_p,
                     double beta, double tol, int max_k, const double* lf,
                     double complex* value, double* abs_sum) noexcept nogil:
    cdef double logz[MAXM]
    cdef double argz[MAXM]
    cdef int zero[MAXM]
    cdef int j, k, below = 0
    cdef double a, prev = INFINITY
    cdef _Acc acc
    for j in range(m):
        a = fabs(z[j].real) if z[j].imag == 0 else (z[j].real * z[j].real + z[j].imag * z[j].imag) ** 0.5
        zero[j] = a == 0.0
        logz[j] = log(a) if a > 0.0 else 0.0
        argz[j] = atan2(z[j].imag, z[j].real)
    acc.re = 0.0
    acc.im = 0.0
    abs_sum[0] = 0.0
    for k in range(max_k + 1):
        acc.level = 0.0
        _walk(0, k, m, lf[k], 0.0, beta, logz, argz, zero, rho_p, lf, &acc)
        abs_sum[0] += acc.level
        if acc.level < tol and acc.level <= prev:
            below += 1
            if below >= 2:
                value[0] = acc.re + 1j * acc.im
                return k + 1
        else:
            below = 0
        prev = acc.level
    value[0] = acc.re + 1j * acc.im
    return -(max_k + 1)


def _log_factorials(int max_k):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lf = np.zeros(max_k + 2)
    cdef int k
    for k in range(1, max_k + 2):
        lf[k] = lf[k - 1] + log(k)
    return lf


def series_sum(z, rho_p, double beta, double tol, int max_k):
    vals, abss, levels, conv = series_batch(np.asarray(z, dtype=complex)[None, :],
                                            rho_p, beta, tol, max_k)
    return complex(vals[0]), float(abss[0]), int(levels[0]), bool(conv[0])


def series_batch(zs, rho_p, double beta, double tol, int max_k):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] Z = np.ascontiguousarray(zs, dtype=complex)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] R = np.ascontiguousarray(rho_p, dtype=float)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lf = _log_factorials(max_k)
    cdef Py_ssize_t n = Z.shape[0], i
    cdef int m = Z.shape[1], lev
    if m > MAXM:
        raise ValueError("too many arguments for the compiled series kernel")
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] vals = np.empty(n, dtype=complex)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] abss = np.empty(n)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] levels = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] conv = np.empty(n, dtype=np.uint8)
    cdef double complex v
    cdef double s
    with nogil:
        for i in range(n):
            lev = _series_one(&Z[i, 0], m, &R[0], beta, tol, max_k, &lf[0], &v, &s)
            vals[i] = v
            abss[i] = s
            levels[i] = lev if lev > 0 else -lev
            conv[i] = lev > 0
    return vals, abss, levels, conv.astype(bool)


def contour_sum(weights, nodes, powers, zs):
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] W = np.ascontiguousarray(weights, dtype=complex)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] S = np.ascontiguousarray(nodes, dtype=complex)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] P = np.ascontiguousarray(powers, dtype=complex)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] Z = np.ascontiguousarray(zs, dtype=complex)
    cdef Py_ssize_t n = Z.shape[0], nn = S.shape[0], mp = P.shape[0]
    cdef Py_ssize_t i, k, j
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=complex)
    cdef double complex acc, den
    with nogil:
        for i in range(n):
            acc = 0
            for k in range(nn):
                den = S[k] - Z[i, 0]
                for j in range(mp):
                    den = den - Z[i, j + 1] * P[j, k]
                acc = acc + W[k] / den
            out[i] = acc
    return out


def l1_caputo(u, double dt, double alpha):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] U = np.ascontiguousarray(u, dtype=float)
    cdef Py_ssize_t n = U.shape[0] - 1, i, k
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.empty(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n + 1)
    cdef double scale = pow(dt, -alpha) / tgamma(2.0 - alpha)
    cdef double acc
    with nogil:
        for k in range(n + 1):
            b[k] = pow(k + 1.0, 1.0 - alpha) - pow(<double>k, 1.0 - alpha)
        for i in range(1, n + 1):
            acc = 0.0
            for k in range(i):
                acc += b[k] * (U[i - k] - U[i - k - 1])
            out[i] = scale * acc
    return out
