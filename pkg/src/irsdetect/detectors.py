"""Decision statistics for aggregate device activity and their MLE helpers.

Seven statistics are provided, one per :class:`DetectorKind`:

* ``Opt``: Neyman-Pearson matched filter, everything known;
* ``T1`` (plus low-SNR and large-L variants): GLRT with unknown white noise power;
* ``T2``: GLRT with unknown transmit powers, known noise covariance;
* ``T3Glrt`` / ``T3Rao``: blind GLRT (log domain) and complex Rao test.

Scalar functions operate on one ``M x L`` matrix.  :func:`evaluate_many`
operates on a stack of trials and exploits the rank-one mean ``u 1^T``:
every statistic depends on the data only through ``y = X 1``,
``||X||_F^2`` and, for the blind tests, ``X X^H``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Optional

import numpy as np

from . import kernels
from .channel import Hypothesis
from .errors import DomainError, RankDeficiencyError, UndefinedStatisticError

log = logging.getLogger(__name__)

__all__ = [
    "DetectorKind",
    "KnownSideInfo",
    "t_opt",
    "t1",
    "t1_parts",
    "t1_low_snr",
    "t1_large_l",
    "t2",
    "t3_glrt_log",
    "t3_rao",
    "pinv",
    "mle_g",
    "mle_power",
    "mle_noise",
    "evaluate_many",
    "evaluate",
]


class DetectorKind(str, Enum):
    Opt = "Opt"
    T1 = "T1"
    T1LowSnr = "T1LowSnr"
    T1LargeL = "T1LargeL"
    T2 = "T2"
    T3Glrt = "T3Glrt"
    T3Rao = "T3Rao"

    @property
    def needs_mean(self) -> bool:
        return self in (DetectorKind.Opt, DetectorKind.T1, DetectorKind.T1LowSnr,
                        DetectorKind.T1LargeL)

    @property
    def needs_noise_cov(self) -> bool:
        return self in (DetectorKind.Opt, DetectorKind.T2)


@dataclass(frozen=True)
class KnownSideInfo:
    """Quantities a detector may know: mean matrix, noise covariance, s and H."""

    Mmat: Optional[np.ndarray] = None
    noise_cov: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None
    H: Optional[np.ndarray] = None

    def check(self, kind: DetectorKind) -> None:
        kind = DetectorKind(kind)
        if kind.needs_mean and self.Mmat is None:
            raise DomainError(f"detector {kind.value} needs the mean matrix")
        if kind.needs_noise_cov and self.noise_cov is None:
            raise DomainError(f"detector {kind.value} needs the noise covariance")

    def for_detector(self, kind: DetectorKind) -> "KnownSideInfo":
        """Strip everything the detector is not supposed to know."""
        kind = DetectorKind(kind)
        self.check(kind)
        return KnownSideInfo(
            Mmat=self.Mmat if kind.needs_mean else None,
            noise_cov=self.noise_cov if kind.needs_noise_cov else None,
            s=self.s,
            H=self.H if kind is DetectorKind.T2 else None,
        )


# --------------------------------------------------------------------------
# helpers

def _cov_solve(noise_cov, B):
    """``Sigma^{-1} B`` through a Cholesky factorization."""
    cov = np.asarray(noise_cov, dtype=complex)
    try:
        C = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("noise covariance is singular or not positive definite") from exc
    diag = np.abs(np.diag(C))
    if diag.min() <= 64 * np.finfo(float).eps * diag.max():
        raise RankDeficiencyError("noise covariance is numerically singular")
    Z = np.linalg.solve(C, B)
    return np.linalg.solve(C.conj().T, Z)


def _energy(X) -> float:
    return float(np.sum(X.real ** 2 + X.imag ** 2))


def pinv(A, factor: float = 16.0):
    """Moore-Penrose inverse with rank cut ``max(dim) * s_max * eps * factor``."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    U, sv, Vh = np.linalg.svd(A, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return np.zeros(A.shape[::-1], dtype=complex)
    cut = max(A.shape) * sv[0] * np.finfo(float).eps * factor
    inv = np.where(sv > cut, 1.0 / np.where(sv > cut, sv, 1.0), 0.0)
    return (Vh.conj().T * inv) @ U.conj().T


# --------------------------------------------------------------------------
# scalar statistics

def t_opt(X, Mmat, noise_cov) -> float:
    """``2 Re tr(M^H Sigma^{-1} X)``."""
    X = np.asarray(X, dtype=complex)
    A = _cov_solve(noise_cov, np.asarray(Mmat, dtype=complex))
    return float(2.0 * np.real(np.vdot(A, X)))


def t1_parts(X, Mmat) -> tuple:
    """Numerator ``2 Re tr(M^H X) - tr(M^H M)`` and denominator ``tr(X^H X)`` of T1."""
    X = np.asarray(X, dtype=complex)
    Mmat = np.asarray(Mmat, dtype=complex)
    num = 2.0 * np.real(np.vdot(Mmat, X)) - _energy(Mmat)
    return float(num), _energy(X)


def t1(X, Mmat) -> float:
    num, den = t1_parts(X, Mmat)
    if den == 0:
        raise UndefinedStatisticError("T1 is undefined for all-zero data")
    return num / den


def t1_low_snr(X, Mmat) -> float:
    X = np.asarray(X, dtype=complex)
    den = _energy(X)
    if den == 0:
        raise UndefinedStatisticError("T1 (low SNR) is undefined for all-zero data")
    return float(np.real(np.vdot(np.asarray(Mmat, dtype=complex), X))) / den


def t1_large_l(X, Mmat, L: Optional[int] = None) -> float:
    X = np.asarray(X, dtype=complex)
    L = X.shape[1] if L is None else int(L)
    if L < 1:
        raise DomainError("L must be >= 1")
    return float(np.real(np.vdot(np.asarray(Mmat, dtype=complex), X))) / L


def t2(X, noise_cov) -> float:
    """``1^T X^H Sigma^{-1} X 1``, kept real."""
    y = np.asarray(X, dtype=complex).sum(axis=1)
    return float(np.real(np.vdot(y, _cov_solve(noise_cov, y))))


def _blind_single(X):
    X = np.asarray(X, dtype=complex)
    M, L = X.shape
    if L <= M:
        raise DomainError(f"blind statistics need L > M, got L={L}, M={M}")
    rao, glrt = kernels.blind_stats(X[None, :, :].copy())
    if np.isnan(rao[0]):
        raise RankDeficiencyError("X X^H is singular; blind statistics need L > M")
    return float(rao[0]), float(glrt[0])


def t3_glrt_log(X) -> float:
    """``-L [lndet(W - X 1 1^T X^H / L) - lndet(W)]`` with ``W = X X^H``.

    Returns ``inf`` when the inner matrix is singular (perfectly coherent data).
    """
    return _blind_single(X)[1]


def t3_rao(X) -> float:
    """``2 1^T X^H (X X^H)^{-1} X 1``, which lies in ``[0, 2L]``."""
    return _blind_single(X)[0]


# --------------------------------------------------------------------------
# maximum-likelihood helpers

def _ones_projection(X, s):
    X = np.asarray(X, dtype=complex)
    s = np.asarray(s, dtype=complex).reshape(-1)
    if not np.any(s):
        raise DomainError("signal vector s must be non-zero")
    L = X.shape[1]
    y = X.sum(axis=1)
    return np.outer(y, s.conj()) @ pinv(np.outer(s, s.conj())) / L


def mle_g(X, s) -> np.ndarray:
    """``(1/L) X 1 s^H (s s^H)^+``: estimate of ``G = H P^{1/2}``."""
    return _ones_projection(X, s)


def mle_power(X, H, s) -> np.ndarray:
    """``(1/L) H^+ X 1 s^H (s s^H)^+``: raw estimate of ``P^{1/2}``.

    ``H^+`` is the left inverse ``(H^H H)^{-1} H^H`` when H has full column
    rank and the Moore-Penrose inverse otherwise.  No projection onto
    diagonal non-negative matrices is applied.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    gram = H.conj().T @ H
    rank = np.linalg.matrix_rank(H)
    if rank == H.shape[1]:
        left = np.linalg.solve(gram, H.conj().T)
    else:
        log.info("H has rank %d < %d; using the Moore-Penrose inverse", rank, H.shape[1])
        left = pinv(H)
    return left @ _ones_projection(X, s)


def mle_noise(X, Mmat=None, hypothesis=Hypothesis.H0, white: bool = False):
    """Sample covariance ``(1/L) R R^H`` (or ``tr(R R^H)/(ML)`` if ``white``).

    ``R = X`` under H0 and ``X - Mmat`` under H1.
    """
    X = np.asarray(X, dtype=complex)
    M, L = X.shape
    if Hypothesis(hypothesis) is Hypothesis.H1:
        R = X - (0 if Mmat is None else np.asarray(Mmat, dtype=complex))
    else:
        R = X
    if white:
        return _energy(R) / (M * L)
    S = R @ R.conj().T / L
    return 0.5 * (S + S.conj().T)


# --------------------------------------------------------------------------
# batched evaluation

def _column_template(Mmat):
    """Return the common column ``u`` if ``Mmat = u 1^T``, else None."""
    Mmat = np.asarray(Mmat, dtype=complex)
    u = Mmat[:, 0]
    if np.array_equal(Mmat, np.repeat(u[:, None], Mmat.shape[1], axis=1)):
        return u
    return None


def evaluate_many(kinds: Iterable, X, side: KnownSideInfo) -> Dict[DetectorKind, np.ndarray]:
    """Evaluate several statistics on a ``(T, M, L)`` stack of trials.

    Shared intermediate quantities are computed once.  Blind statistics
    raise :class:`RankDeficiencyError` if any trial has a singular ``X X^H``.
    """
    kinds = [DetectorKind(k) for k in kinds]
    for kind in kinds:
        side.check(kind)
    X = np.ascontiguousarray(X, dtype=np.complex128)
    if X.ndim != 3:
        raise DomainError("expected a (trials, M, L) stack")
    _, M, L = X.shape
    out: Dict[DetectorKind, np.ndarray] = {}

    need_y = any(k is not DetectorKind.T3Glrt and k is not DetectorKind.T3Rao for k in kinds)
    if need_y:
        y, energy = kernels.row_sum_energy(X)

    if any(k.needs_mean for k in kinds):
        u = _column_template(side.Mmat)
        Mmat = np.asarray(side.Mmat, dtype=complex)
        if u is not None:
            match = np.real(y @ u.conj())
        else:
            match = np.real(np.einsum("ml,tml->t", Mmat.conj(), X))
        mm = _energy(Mmat)
    for kind in kinds:
        if kind is DetectorKind.Opt:
            A = _cov_solve(side.noise_cov, np.asarray(side.Mmat, dtype=complex))
            a = _column_template(A)
            if a is not None:
                out[kind] = 2.0 * np.real(y @ a.conj())
            else:
                out[kind] = 2.0 * np.real(np.einsum("ml,tml->t", A.conj(), X))
        elif kind in (DetectorKind.T1, DetectorKind.T1LowSnr):
            if np.any(energy == 0):
                raise UndefinedStatisticError("T1 is undefined for all-zero data")
            num = 2.0 * match - mm if kind is DetectorKind.T1 else match
            out[kind] = num / energy
        elif kind is DetectorKind.T1LargeL:
            out[kind] = match / L
        elif kind is DetectorKind.T2:
            z = _cov_solve(side.noise_cov, y.T)
            out[kind] = np.real(np.einsum("tm,mt->t", y.conj(), z))
    if DetectorKind.T3Rao in kinds or DetectorKind.T3Glrt in kinds:
        if L <= M:
            raise DomainError(f"blind statistics need L > M, got L={L}, M={M}")
        rao, glrt = kernels.blind_stats(X)
        if np.any(np.isnan(rao)):
            raise RankDeficiencyError("X X^H is singular in at least one trial; need L > M")
        if DetectorKind.T3Rao in kinds:
            out[DetectorKind.T3Rao] = rao
        if DetectorKind.T3Glrt in kinds:
            out[DetectorKind.T3Glrt] = glrt
    return out


def evaluate(kind, X, side: KnownSideInfo) -> np.ndarray:
    """Single-detector form of :func:`evaluate_many`."""
    kind = DetectorKind(kind)
    return evaluate_many([kind], X, side)[kind]


def t1_parts_batch(X, Mmat) -> tuple:
    """Batched numerator and denominator of T1 for a ``(T, M, L)`` stack."""
    X = np.ascontiguousarray(X, dtype=np.complex128)
    Mmat = np.asarray(Mmat, dtype=complex)
    num = 2.0 * np.real(np.einsum("ml,tml->t", Mmat.conj(), X)) - _energy(Mmat)
    _, energy = kernels.row_sum_energy(X)
    return num, energy
