"""Pure numpy implementation of the compiled kernels in ``_kernels.pyx``.

The Cholesky factorization is vectorized across trials and applies the
same pivot rule as the compiled code, so both backends flag the same
degenerate inputs.
"""
import numpy as np

PIVOT_RTOL = 64.0 * np.finfo(float).eps


def _batched_cholesky(A, scale):
    """Lower Cholesky factors of a stack of Hermitian matrices.

    Returns ``(C, logdet, ok)``; rows where ``ok`` is False hold garbage.
    """
    T, m, _ = A.shape
    C = np.zeros_like(A)
    logdet = np.zeros(T)
    ok = np.ones(T, dtype=bool)
    for j in range(m):
        d = A[:, j, j].real - np.sum(np.abs(C[:, j, :j]) ** 2, axis=1)
        good = d > PIVOT_RTOL * scale[:, j]
        ok &= good
        ljj = np.sqrt(np.where(good, d, 1.0))
        C[:, j, j] = ljj
        logdet += 2.0 * np.log(ljj)
        if j + 1 < m:
            s = A[:, j + 1:, j] - np.einsum("tik,tk->ti", C[:, j + 1:, :j], C[:, j, :j].conj())
            C[:, j + 1:, j] = s / ljj[:, None]
    return C, logdet, ok


def blind_stats(X):
    X = np.ascontiguousarray(X, dtype=np.complex128)
    T, m, L = X.shape
    y = X.sum(axis=2)
    W = X @ np.conj(np.swapaxes(X, 1, 2))
    scale = np.einsum("tii->ti", W).real.copy()
    inner = W - y[:, :, None] * y.conj()[:, None, :] / L
    C, logdet_w, ok_w = _batched_cholesky(W, scale)
    z = np.empty_like(y)
    for i in range(m):
        z[:, i] = (y[:, i] - np.einsum("tk,tk->t", C[:, i, :i], z[:, :i])) / C[:, i, i]
    rao = 2.0 * np.sum(np.abs(z) ** 2, axis=1)
    Ci, logdet_in, ok_in = _batched_cholesky(inner, scale)
    delta = logdet_in - logdet_w
    glrt = np.where(delta >= 0.0, 0.0, -L * delta)
    glrt = np.where(ok_in & (delta >= np.log(PIVOT_RTOL)), glrt, np.inf)
    rao = np.where(ok_w, rao, np.nan)
    glrt = np.where(ok_w, glrt, np.nan)
    return rao, glrt


def row_sum_energy(X):
    X = np.asarray(X, dtype=np.complex128)
    return X.sum(axis=2), np.sum(X.real ** 2 + X.imag ** 2, axis=(1, 2))
