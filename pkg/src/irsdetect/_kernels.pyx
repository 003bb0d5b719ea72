# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-trial kernels for the blind statistics.

For every trial ``X`` (M x L) this forms ``W = X X^H`` and ``y = X 1``,
factors ``W`` by an in-place complex Cholesky decomposition, and returns

* ``rao = 2 y^H W^{-1} y`` (via one forward substitution), and
* ``glrt = -L [lndet(W - y y^H / L) - lndet(W)]`` (via a second Cholesky).

A pivot not exceeding ``PIVOT_RTOL * W_jj`` marks the matrix as not
positive definite.  ``W`` failing yields NaN for both outputs; the inner
matrix failing (or a log-determinant drop below ``log(PIVOT_RTOL)``)
yields ``+inf`` for the GLRT statistic.
"""
import numpy as np

from libc.math cimport log, sqrt, INFINITY, NAN
from libc.stdlib cimport malloc, free

cdef double PIVOT_RTOL = 64.0 * 2.220446049250313e-16


cdef int _cholesky(double* re, double* im, const double* scale, Py_ssize_t m,
                   double* logdet) noexcept nogil:
    """Lower Cholesky factor in place (row-major m x m, lower triangle used)."""
    cdef Py_ssize_t i, j, k
    cdef double d, sr, si, ljj
    logdet[0] = 0.0
    for j in range(m):
        d = re[j * m + j]
        for k in range(j):
            d -= re[j * m + k] * re[j * m + k] + im[j * m + k] * im[j * m + k]
        if not d > PIVOT_RTOL * scale[j]:
            return -1
        ljj = sqrt(d)
        re[j * m + j] = ljj
        im[j * m + j] = 0.0
        logdet[0] += 2.0 * log(ljj)
        for i in range(j + 1, m):
            sr = re[i * m + j]
            si = im[i * m + j]
            for k in range(j):
                # A_ij -= L_ik * conj(L_jk)
                sr -= re[i * m + k] * re[j * m + k] + im[i * m + k] * im[j * m + k]
                si -= im[i * m + k] * re[j * m + k] - re[i * m + k] * im[j * m + k]
            re[i * m + j] = sr / ljj
            im[i * m + j] = si / ljj
    return 0


def blind_stats(const double complex[:, :, ::1] X):
    """Return ``(rao, glrt_log)`` arrays for a stack of observations."""
    cdef Py_ssize_t T = X.shape[0], m = X.shape[1], L = X.shape[2]
    rao_arr = np.empty(T, dtype=np.float64)
    glrt_arr = np.empty(T, dtype=np.float64)
    cdef double[::1] rao = rao_arr
    cdef double[::1] glrt = glrt_arr
    cdef Py_ssize_t t, i, j, l, k
    cdef double ar, ai, br, bi, zr, zi, r, logdet_w, logdet_in, delta, inv_l
    cdef double* wr = <double*> malloc(m * m * sizeof(double))
    cdef double* wi = <double*> malloc(m * m * sizeof(double))
    cdef double* cr = <double*> malloc(m * m * sizeof(double))
    cdef double* ci = <double*> malloc(m * m * sizeof(double))
    cdef double* yr = <double*> malloc(m * sizeof(double))
    cdef double* yi = <double*> malloc(m * sizeof(double))
    cdef double* scale = <double*> malloc(m * sizeof(double))
    if not (wr and wi and cr and ci and yr and yi and scale):
        free(wr); free(wi); free(cr); free(ci); free(yr); free(yi); free(scale)
        raise MemoryError()
    inv_l = 1.0 / L
    try:
        with nogil:
            for t in range(T):
                for i in range(m):
                    zr = 0.0
                    zi = 0.0
                    for l in range(L):
                        zr += X[t, i, l].real
                        zi += X[t, i, l].imag
                    yr[i] = zr
                    yi[i] = zi
                    for j in range(i + 1):
                        zr = 0.0
                        zi = 0.0
                        for l in range(L):
                            ar = X[t, i, l].real
                            ai = X[t, i, l].imag
                            br = X[t, j, l].real
                            bi = X[t, j, l].imag
                            zr += ar * br + ai * bi
                            zi += ai * br - ar * bi
                        wr[i * m + j] = zr
                        wi[i * m + j] = zi
                    scale[i] = wr[i * m + i]
                # inner matrix W - y y^H / L, lower triangle
                for i in range(m):
                    for j in range(i + 1):
                        cr[i * m + j] = wr[i * m + j] - (yr[i] * yr[j] + yi[i] * yi[j]) * inv_l
                        ci[i * m + j] = wi[i * m + j] - (yi[i] * yr[j] - yr[i] * yi[j]) * inv_l
                if _cholesky(wr, wi, scale, m, &logdet_w) != 0:
                    rao[t] = NAN
                    glrt[t] = NAN
                    continue
                # forward solve C z = y, accumulate |z|^2
                r = 0.0
                for i in range(m):
                    zr = yr[i]
                    zi = yi[i]
                    for k in range(i):
                        zr -= wr[i * m + k] * yr[k] - wi[i * m + k] * yi[k]
                        zi -= wr[i * m + k] * yi[k] + wi[i * m + k] * yr[k]
                    yr[i] = zr / wr[i * m + i]
                    yi[i] = zi / wr[i * m + i]
                    r += yr[i] * yr[i] + yi[i] * yi[i]
                rao[t] = 2.0 * r
                if _cholesky(cr, ci, scale, m, &logdet_in) != 0:
                    glrt[t] = INFINITY
                    continue
                delta = logdet_in - logdet_w
                if delta < log(PIVOT_RTOL):
                    glrt[t] = INFINITY
                elif delta >= 0.0:
                    glrt[t] = 0.0
                else:
                    glrt[t] = -L * delta
    finally:
        free(wr); free(wi); free(cr); free(ci); free(yr); free(yi); free(scale)
    return rao_arr, glrt_arr


def row_sum_energy(const double complex[:, :, ::1] X):
    """Return ``(y, energy)`` with ``y = X 1`` and ``energy = ||X||_F^2`` per trial."""
    cdef Py_ssize_t T = X.shape[0], m = X.shape[1], L = X.shape[2]
    y_arr = np.empty((T, m), dtype=np.complex128)
    e_arr = np.empty(T, dtype=np.float64)
    cdef double complex[:, ::1] y = y_arr
    cdef double[::1] e = e_arr
    cdef Py_ssize_t t, i, l
    cdef double sr, si, acc, ar, ai
    with nogil:
        for t in range(T):
            acc = 0.0
            for i in range(m):
                sr = 0.0
                si = 0.0
                for l in range(L):
                    ar = X[t, i, l].real
                    ai = X[t, i, l].imag
                    sr += ar
                    si += ai
                    acc += ar * ar + ai * ai
                y[t, i] = sr + 1j * si
            e[t] = acc
    return y_arr, e_arr
