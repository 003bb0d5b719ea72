"""Closed-form false-alarm and detection probabilities, thresholds,
non-centrality and design-guideline formulas, and the Fisher-information
and correlation oracles used to validate the detectors.

Conventions: ``u = H P^{1/2} s`` is the common column of the mean matrix,
``b = tr(M^H Sigma^{-1} M) = L u^H Sigma^{-1} u`` and
``traceMM = tr(M M^H) = L ||u||^2``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import statfun as sf
from .channel import Hypothesis
from .detectors import pinv
from .errors import DomainError, NumericError

__all__ = [
    "ApproximationWarning",
    "DegenerateScenarioError",
    "AnalyticParams",
    "DesignInputs",
    "analytic_params",
    "opt_perf",
    "opt_threshold",
    "ratio_normal_sf",
    "t1_moments",
    "t1_perf",
    "t1_threshold",
    "t2_weights",
    "t2_theta_beta",
    "t2_perf",
    "t2_threshold",
    "rao_pfa_exact",
    "rao_pfa_exact_paths",
    "rao_threshold_exact",
    "rao_null_beta_pfa",
    "rao_null_beta_threshold",
    "rao_beta_pd",
    "glrt_null_pfa",
    "glrt_null_threshold",
    "rao_asymptotic",
    "rao_asymptotic_threshold",
    "lambda_rao_from_model",
    "lambda_rao_from_data",
    "noncentrality",
    "noncentrality_equal_power",
    "design_guidelines",
    "FimBlocks",
    "fim_blocks",
    "score_vectors",
    "t1_num_den_correlation",
]


class ApproximationWarning(UserWarning):
    """An asymptotic approximation is used outside its comfortable range."""


class DegenerateScenarioError(DomainError):
    """The scenario carries no signal energy, so the requested quantity is undefined."""


def _invert_decreasing(fun, target, lo, hi, **kw):
    """Solve ``fun(t) = target`` for a non-increasing tail ``fun`` via its log."""

    def log_fun(t):
        v = fun(t)
        return math.log(v) if v > 0 else -np.inf

    return sf._brent_log(log_fun, math.log(target), lo, hi, **kw)


def _check_prob(p, name="pfa_target"):
    if not 0.0 < p < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {p}")


# --------------------------------------------------------------------------
# parameter bundles

@dataclass(frozen=True)
class AnalyticParams:
    """Scalars that feed the closed-form performance expressions."""

    b: complex
    sigma2: float
    traceMM: float
    eigvals: np.ndarray
    eigvecs: np.ndarray
    m: np.ndarray
    L: int
    M: int
    theta1: float
    beta1: float
    lambda_rao: float
    rho_nd: float

    def __post_init__(self):
        if self.b.real < -1e-12 * max(1.0, abs(self.b)) or self.traceMM < 0:
            raise DomainError("b and tr(M M^H) must be non-negative")
        if np.any(self.eigvals <= 0) or np.any(self.m < 0):
            raise DomainError("noise eigenvalues must be > 0 and m_i >= 0")
        if not (self.theta1 > 0 and self.beta1 > 0 and self.lambda_rao >= 0):
            raise DomainError("theta1, beta1 must be > 0 and lambda_rao >= 0")
        if not 0.0 <= self.rho_nd <= 1.0:
            raise DomainError("rho_nd must lie in [0, 1]")


def analytic_params(u, noise_cov, L: int, sigma2: Optional[float] = None,
                    printed_beta: bool = False) -> AnalyticParams:
    """Collect every analytic scalar for the mean column ``u``.

    ``sigma2`` defaults to ``tr(Sigma_n) / M`` (exact for white noise).
    """
    u = np.asarray(u, dtype=complex).reshape(-1)
    cov = np.asarray(noise_cov, dtype=complex)
    M = u.size
    lam, Q = np.linalg.eigh(cov)
    if lam.min() <= 0:
        raise DomainError("noise covariance must be positive definite")
    m = np.abs(Q.conj().T @ u) ** 2
    w = float(np.sum(m / lam))
    b = complex(L * w)
    s2 = float(np.real(np.trace(cov)) / M) if sigma2 is None else float(sigma2)
    tmm = float(L * np.vdot(u, u).real)
    theta1, beta1 = t2_theta_beta(m, lam, L, printed_beta)
    rho, _ = t1_num_den_correlation(tmm, s2, L, M)
    return AnalyticParams(b=b, sigma2=s2, traceMM=tmm, eigvals=lam, eigvecs=Q, m=m, L=int(L),
                          M=M, theta1=theta1, beta1=beta1, lambda_rao=2.0 * L * w, rho_nd=rho)


@dataclass(frozen=True)
class DesignInputs:
    """Inputs of the non-centrality and design-guideline formulas."""

    P_total: float
    K: int
    M: int
    N: int
    L: int
    sigma2: float
    s_energy: float
    alpha_irs: float
    direct_power: tuple
    lambda_min: float
    snr_min: float
    fs: float
    channel_gains: tuple
    eta_circuit: float
    delay_spread: float = 0.0

    def __post_init__(self):
        positive = ("P_total", "K", "M", "N", "L", "sigma2", "s_energy", "alpha_irs",
                    "lambda_min", "snr_min", "fs", "eta_circuit")
        for name in positive:
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")
        if len(self.direct_power) != self.K or any(d < 0 for d in self.direct_power):
            raise DomainError("direct_power needs K non-negative entries")
        if len(self.channel_gains) != self.K or any(not g > 0 for g in self.channel_gains):
            raise DomainError("channel_gains needs K positive entries")
        if self.delay_spread < 0:
            raise DomainError("delay_spread must be >= 0")


# --------------------------------------------------------------------------
# optimal detector

def _require_b(b) -> float:
    rb = float(np.real(b))
    if not rb > 0:
        raise DegenerateScenarioError("Re{b} must be > 0 (no signal energy)")
    return rb


def opt_perf(tau, b) -> tuple:
    """``(pfa, pd)`` of the matched filter: ``t_opt ~ N(0 or 2Re b, 2Re b)``."""
    rb = _require_b(b)
    sd = math.sqrt(2.0 * rb)
    tau = np.asarray(tau, dtype=float)
    return sf.q_function(tau / sd), sf.q_function((tau - 2.0 * rb) / sd)


def opt_threshold(pfa_target: float, b) -> float:
    _check_prob(pfa_target)
    return sf.inv_q(pfa_target) * math.sqrt(2.0 * _require_b(b))


# --------------------------------------------------------------------------
# unknown noise power (T1)

def ratio_normal_sf(t, theta1, sigma1, theta2, sigma2, rho=0.0):
    """``P(w / v > t)`` for correlated normals in the positive-denominator limit.

    ``1 - Phi((theta2 t - theta1) / (sigma1 sigma2 a(t)))`` with
    ``a(t) = sqrt(t^2/sigma1^2 - 2 rho t/(sigma1 sigma2) + 1/sigma2^2)``.
    """
    t = np.asarray(t, dtype=float)
    a2 = t ** 2 / sigma1 ** 2 - 2.0 * rho * t / (sigma1 * sigma2) + 1.0 / sigma2 ** 2
    if np.any(~(a2 > 0)):
        raise NumericError("Hinkley scale a(t) must be positive")
    z = (theta2 * t - theta1) / (sigma1 * sigma2 * np.sqrt(a2))
    return sf.q_function(z)


def t1_moments(traceMM: float, sigma2: float, L: int, M: int, hypothesis) -> tuple:
    """``(theta1, sigma1, theta2, sigma2, rho)`` of T1's numerator and denominator."""
    T = float(traceMM)
    s1 = math.sqrt(2.0 * sigma2 * T)
    if Hypothesis(hypothesis) is Hypothesis.H0:
        return -T, s1, L * M * sigma2, math.sqrt(L * M) * sigma2, 0.0
    th2 = L * M * sigma2 + T
    sd2 = math.sqrt(L * M * sigma2 ** 2 + 2.0 * sigma2 * T)
    rho, _ = t1_num_den_correlation(T, sigma2, L, M)
    return T, s1, th2, sd2, rho


def t1_perf(tau, traceMM: float, sigma2: float, L: int, M: int,
            clip_support: bool = True) -> tuple:
    """``(pfa, pd, rho)`` for T1 from the Gaussian-ratio CDF.

    H0 uses zero correlation between numerator and denominator, H1 uses the
    correlation of :func:`t1_num_den_correlation`.  Since ``T1 <= 1``
    always (Cauchy-Schwarz), ``clip_support`` returns 0 for ``tau >= 1``,
    where the limiting-form expression is no longer a valid tail.
    """
    if not (traceMM > 0 and sigma2 > 0):
        raise DomainError("traceMM and sigma2 must be > 0")
    ratio = math.sqrt(L * M)
    if ratio < 3:
        warnings.warn(f"denominator mean/sd = {ratio:.2f} < 3; Gaussian-ratio CDF is rough",
                      ApproximationWarning, stacklevel=2)
    tau = np.asarray(tau, dtype=float)
    p0 = ratio_normal_sf(tau, *t1_moments(traceMM, sigma2, L, M, Hypothesis.H0))
    m1 = t1_moments(traceMM, sigma2, L, M, Hypothesis.H1)
    p1 = ratio_normal_sf(tau, *m1)
    if clip_support:
        p0 = np.where(tau >= 1.0, 0.0, p0)
        p1 = np.where(tau >= 1.0, 0.0, p1)
    if np.ndim(tau) == 0:
        p0, p1 = float(p0), float(p1)
    return p0, p1, m1[4]


def t1_pfa_printed(tau, traceMM: float, sigma2: float, L: int, M: int):
    """False-alarm probability written with the substituted H0 moments."""
    T = traceMM
    a = np.sqrt(np.asarray(tau) ** 2 / (2 * sigma2 * T) + 1.0 / (L * M * sigma2 ** 2))
    return sf.q_function((L * M * sigma2 * np.asarray(tau) + T)
                         / (np.sqrt(2 * L * M * sigma2 ** 3 * T) * a))


def t1_threshold(pfa_target: float, traceMM: float, sigma2: float, L: int, M: int) -> float:
    _check_prob(pfa_target)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ApproximationWarning)
        fun = lambda t: t1_perf(t, traceMM, sigma2, L, M)[0]
        if pfa_target < fun(1.0 - 1e-12):
            raise DomainError("target false-alarm rate is below the reachable range")
        return _invert_decreasing(fun, pfa_target, -1.0, 1.0 - 1e-12, hi_limit=1.0 - 1e-12)


# --------------------------------------------------------------------------
# unknown transmit powers (T2)

def t2_weights(eig_pairs, u) -> tuple:
    """``(lambda_i, m_i)`` with ``m_i = |q_i^H u|^2``."""
    lam, Q = eig_pairs
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError("noise eigenvalues must be > 0")
    m = np.abs(np.asarray(Q).conj().T @ np.asarray(u, dtype=complex)) ** 2
    return lam, m


def t2_theta_beta(m, lam, L: int, printed_beta: bool = False) -> tuple:
    """Scaled chi-square parameters matching T2's mean and variance under H1.

    With ``S = sum m_i / lambda_i``: ``theta1 = L (M + 2 L S) / (2 (M + L S))``
    and ``beta1 = 2 (M + L S)^2 / (M + 2 L S)``, so that
    ``theta1 beta1 = L M + L^2 S`` and ``2 theta1^2 beta1 = L^2 M + 2 L^3 S``.
    ``printed_beta`` substitutes ``beta1 = L M + S`` instead.
    """
    M = len(lam)
    S = float(np.sum(np.asarray(m) / np.asarray(lam)))
    theta1 = (L * M + 2.0 * L * L * S) / (2.0 * M + 2.0 * L * S)
    if printed_beta:
        beta1 = L * M + S
    else:
        beta1 = 2.0 * (M + L * S) ** 2 / (M + 2.0 * L * S)
    return theta1, beta1


def t2_perf(tau, eig_pairs, u, L: int, M: Optional[int] = None,
            printed_beta: bool = False) -> tuple:
    """``(pfa, pd, theta1, beta1)`` for T2.

    ``pfa = Gamma(M, tau/L)/Gamma(M)`` and
    ``pd = Gamma(beta1/2, tau/(2 theta1))/Gamma(beta1/2)``.
    """
    lam, m = t2_weights(eig_pairs, u)
    M = len(lam) if M is None else int(M)
    theta1, beta1 = t2_theta_beta(m, lam, L, printed_beta)
    tau = np.maximum(np.asarray(tau, dtype=float), 0.0)
    pfa = sf.gamma_upper_reg(M, tau / L)
    pd = sf.gamma_upper_reg(beta1 / 2.0, tau / (2.0 * theta1))
    return pfa, pd, theta1, beta1


def t2_pd_exact(tau, eig_pairs, u, L: int):
    """Exact T2 detection probability.

    Each whitened component ``|q_i^H y|^2 / lambda_i`` has the same scale
    ``L/2`` whatever ``lambda_i`` is, so ``2 T2 / L`` is non-central
    chi-square with ``2M`` degrees of freedom and non-centrality
    ``2 L sum m_i / lambda_i``.  Hence ``pd = Q_M(sqrt(lam), sqrt(2 tau / L))``.
    """
    lam, m = t2_weights(eig_pairs, u)
    nc = 2.0 * L * float(np.sum(m / lam))
    tau = np.maximum(np.asarray(tau, dtype=float), 0.0)
    return sf.marcum_q(len(lam), math.sqrt(nc), np.sqrt(2.0 * tau / L))


def t2_threshold(pfa_target: float, L: int, M: int) -> float:
    _check_prob(pfa_target)
    return L * sf.gamma_upper_reg(M, pfa_target, invert=True)


# --------------------------------------------------------------------------
# blind detector: finite-sample laws

def _check_lm(L, M):
    if not (M >= 1 and L > M):
        raise DomainError(f"need L > M >= 1, got L={L}, M={M}")


def rao_pfa_exact_paths(tau: float, L: int, M: int) -> tuple:
    """False-alarm probability of the Rao statistic under the scaled-Fisher law,
    computed once through the incomplete beta function and once through the
    Fisher CDF."""
    _check_lm(L, M)
    tau = float(tau)
    if tau <= 0:
        return 1.0, 1.0
    if math.isinf(tau):
        return 0.0, 0.0
    beta_path = sf.reg_inc_beta_complement(M, L - M + 1, 1.0 / (1.0 + 2.0 * L / tau))
    d2 = 2 * (L - M + 1)
    fisher_path = sf.dist_sf("fisher", (L - M + 1) * tau / (2.0 * M * L), d1=2 * M, d2=d2)
    return beta_path, fisher_path


def rao_pfa_exact(tau, L: int, M: int) -> float:
    """``1 - I(M, L - M + 1; (1 + 2L/tau)^{-1})``, checked against the Fisher path."""
    if np.ndim(tau) > 0:
        return np.array([rao_pfa_exact(t, L, M) for t in np.ravel(tau)]).reshape(np.shape(tau))
    a, b = rao_pfa_exact_paths(tau, L, M)
    if abs(a - b) > 1e-10 * max(abs(a), 1e-300) and abs(a - b) > 1e-300:
        raise NumericError(f"beta and Fisher paths disagree: {a!r} vs {b!r}")
    return a


def rao_threshold_exact(pfa_target: float, L: int, M: int) -> float:
    _check_lm(L, M)
    _check_prob(pfa_target)
    return _invert_decreasing(lambda t: rao_pfa_exact(t, L, M), pfa_target, 1e-3, 4.0 * M + 10)


def rao_null_beta_pfa(tau, L: int, M: int):
    """Exact H0 tail of the Rao statistic: ``t/(2L) ~ Beta(M, L - M)``.

    Follows from ``X X^H = W_c + y y^H / L`` with ``W_c`` complex Wishart of
    ``L - 1`` degrees of freedom independent of ``y = X 1``.
    """
    _check_lm(L, M)
    x = np.clip(np.asarray(tau, dtype=float) / (2.0 * L), 0.0, 1.0)
    return sf.reg_inc_beta_complement(M, L - M, x)


def rao_null_beta_threshold(pfa_target: float, L: int, M: int) -> float:
    _check_lm(L, M)
    _check_prob(pfa_target)
    x = _invert_decreasing(lambda v: float(sf.reg_inc_beta_complement(M, L - M, v)),
                           pfa_target, 0.25, 0.75, lo_limit=0.0, hi_limit=1.0)
    return 2.0 * L * x


def rao_beta_pd(tau, L: int, M: int, lam: float):
    """Exact H1 tail: non-central ``Beta(M, L - M; lam)`` with ``lam = 2L u^H Sigma^{-1} u``."""
    _check_lm(L, M)
    if np.ndim(tau) > 0:
        return np.array([rao_beta_pd(t, L, M, lam) for t in np.ravel(tau)]).reshape(np.shape(tau))
    x = min(max(float(tau) / (2.0 * L), 0.0), 1.0)
    return sf.noncentral_beta_sf(M, L - M, lam, x)


def glrt_null_pfa(tau, L: int, M: int):
    """Exact H0 tail of the log-domain blind GLRT statistic.

    ``ln T3 = -L ln(1 - t_rao / (2L))``, so the event ``ln T3 > tau`` is
    ``t_rao / (2L) > 1 - exp(-tau / L)`` under the beta law above.
    """
    _check_lm(L, M)
    tau = np.maximum(np.asarray(tau, dtype=float), 0.0)
    return sf.reg_inc_beta_complement(M, L - M, -np.expm1(-tau / L))


def glrt_null_threshold(pfa_target: float, L: int, M: int) -> float:
    x = rao_null_beta_threshold(pfa_target, L, M) / (2.0 * L)
    return -L * math.log1p(-x)


# --------------------------------------------------------------------------
# blind detector: large-sample laws

def rao_asymptotic(tau, lambda_rao: float, M: int) -> tuple:
    """``(pfa, pd)``: central and non-central chi-square with 2M degrees of freedom."""
    if lambda_rao < 0 or M < 1:
        raise DomainError("need lambda >= 0 and M >= 1")
    if np.ndim(tau) > 0:
        pairs = [rao_asymptotic(t, lambda_rao, M) for t in np.ravel(tau)]
        return (np.array([p[0] for p in pairs]).reshape(np.shape(tau)),
                np.array([p[1] for p in pairs]).reshape(np.shape(tau)))
    tau = max(float(tau), 0.0)
    pfa = sf.dist_sf("central_chi2", tau, dof=2 * M)
    pd = sf.marcum_q(M, math.sqrt(lambda_rao), math.sqrt(tau))
    return pfa, pd


def rao_asymptotic_threshold(pfa_target: float, M: int) -> float:
    _check_prob(pfa_target)
    return 2.0 * sf.gamma_upper_reg(M, pfa_target, invert=True)


def lambda_rao_from_model(G, s, noise_cov, L: int) -> float:
    """``2L s^H G^H Sigma^{-1} G s``: the non-centrality with ``X X^H -> L Sigma``."""
    u = np.asarray(G, dtype=complex) @ np.asarray(s, dtype=complex)
    z = np.linalg.solve(np.asarray(noise_cov, dtype=complex), u)
    return float(2.0 * L * np.real(np.vdot(u, z)))


def lambda_rao_from_data(G, s, X) -> float:
    """``2 L^2 s^H G^H (X X^H)^{-1} G s`` evaluated on one observation."""
    X = np.asarray(X, dtype=complex)
    L = X.shape[1]
    u = np.asarray(G, dtype=complex) @ np.asarray(s, dtype=complex)
    z = np.linalg.solve(X @ X.conj().T, u)
    return float(2.0 * L * L * np.real(np.vdot(u, z)))


# --------------------------------------------------------------------------
# non-centrality and design guidelines

def noncentrality(inputs: DesignInputs, powers: Sequence[float]) -> dict:
    """Average-channel non-centrality and the effective-SNR detection condition.

    ``lambda = (2 L M ||s||^2 / sigma^2) sum_k p_k (N^2 alpha + E||d_k||^2)``.
    ``snr_eff`` is ``(1/K) sum_k p_k (N^2 alpha + E||d_k||^2) / sigma^2``.
    """
    p = np.asarray(powers, dtype=float)
    if p.shape != (inputs.K,) or np.any(~(p > 0)):
        raise DomainError("powers must hold K positive values")
    gain = inputs.N ** 2 * inputs.alpha_irs + np.asarray(inputs.direct_power, dtype=float)
    scale = 2.0 * inputs.L * inputs.M * inputs.s_energy
    lam = scale / inputs.sigma2 * float(np.sum(p * gain))
    snr_eff = float(np.sum(p * gain)) / (inputs.K * inputs.sigma2)
    snr_required = inputs.lambda_min / scale
    return {
        "lambda": lam,
        "snr_eff": snr_eff,
        "snr_required": snr_required,
        "detectable": snr_eff >= snr_required,
    }


def noncentrality_equal_power(inputs: DesignInputs) -> dict:
    """:func:`noncentrality` with ``p_k = P_total / K``."""
    return noncentrality(inputs, np.full(inputs.K, inputs.P_total / inputs.K))


def design_guidelines(inputs: DesignInputs) -> dict:
    """Evaluate the sizing rules for L, N, K, power allocation and dPd/dL."""
    i = inputs
    g = np.asarray(i.channel_gains, dtype=float)
    d = np.asarray(i.direct_power, dtype=float)
    L_min = i.M + i.K
    L_async = L_min + i.fs * i.delay_spread
    dtau = (i.L - L_min) / i.fs
    N_min = (math.sqrt(i.K * i.sigma2 / (i.P_total * i.s_energy))
             / math.sqrt(g.max()) * (1.0 + 1.0 / i.snr_min))
    weighted = float(np.sum(g * (i.N ** 2 * i.alpha_irs + d)) / np.sum(g))
    K_max = 2.0 * i.L * i.M * i.P_total * i.s_energy / (i.lambda_min * i.sigma2) * weighted
    gap = 1.0 + float(np.var(g) / np.mean(g) ** 2)
    dpd_dl = i.P_total * i.N ** 2 * i.s_energy / (2.0 * i.sigma2 * i.K * i.L ** 2) - i.eta_circuit
    return {
        "L_min": L_min,
        "L_min_async": L_async,
        "L_feasible": i.L >= L_async,
        "delta_tau_max": dtau,
        "delta_tau_feasible": dtau >= 0,
        "N_min": N_min,
        "K_max": K_max,
        "power_gap_ratio": gap,
        "power_gap_order_term": i.M / i.N ** 2,
        "dPd_dL": dpd_dl,
    }


# --------------------------------------------------------------------------
# Fisher information and score

@dataclass(frozen=True)
class FimBlocks:
    upper: np.ndarray          # L s* s^T (x) Sigma^{-1}
    lower: np.ndarray          # L s s^H (x) Sigma^{-T}
    cross: np.ndarray          # zero block
    inverse_upper: np.ndarray  # (1/L) (s* s^T)^+ (x) Sigma
    inverse_lower: np.ndarray  # (1/L) (s s^H)^+ (x) Sigma^T
    full: np.ndarray = field(repr=False)
    inverse: np.ndarray = field(repr=False)


def fim_blocks(s, noise_cov, L: int) -> FimBlocks:
    """Fisher information of ``[vec G; vec G*]`` and its (pseudo-)inverse."""
    s = np.asarray(s, dtype=complex).reshape(-1)
    if not np.any(s):
        raise DomainError("s must be non-zero")
    cov = np.asarray(noise_cov, dtype=complex)
    inv = np.linalg.inv(cov)
    ss_t = np.outer(s.conj(), s)      # s* s^T
    ss_h = np.outer(s, s.conj())      # s s^H
    upper = L * np.kron(ss_t, inv)
    lower = L * np.kron(ss_h, inv.T)
    n = upper.shape[0]
    cross = np.zeros((n, n), dtype=complex)
    inv_upper = np.kron(pinv(ss_t), cov) / L
    inv_lower = np.kron(pinv(ss_h), cov.T) / L
    full = np.block([[upper, cross], [cross, lower]])
    inverse = np.block([[inv_upper, cross], [cross, inv_lower]])
    return FimBlocks(upper, lower, cross, inv_upper, inv_lower, full, inverse)


def score_vectors(X, G, s, noise_cov) -> np.ndarray:
    """Score ``[b; b*]`` with ``b = (s* 1^T (x) Sigma^{-1}) vec(X - G s 1^T)``.

    ``X`` may be one ``M x L`` matrix or a ``(T, M, L)`` stack; the result
    has shape ``(2MK,)`` or ``(T, 2MK)``.  ``vec`` stacks columns.
    """
    X = np.asarray(X, dtype=complex)
    single = X.ndim == 2
    if single:
        X = X[None]
    s = np.asarray(s, dtype=complex).reshape(-1)
    G = np.asarray(G, dtype=complex)
    inv = np.linalg.inv(np.asarray(noise_cov, dtype=complex))
    R = X - (G @ s)[None, :, None]
    r = inv @ R.sum(axis=2)[..., None]                  # (T, M, 1): Sigma^{-1} R 1
    B = r * s.conj()[None, None, :]                     # (T, M, K): Sigma^{-1} R 1 s^H
    b = np.swapaxes(B, 1, 2).reshape(B.shape[0], -1)    # column-major vec
    out = np.concatenate([b, b.conj()], axis=1)
    return out[0] if single else out


def t1_num_den_correlation(traceMM: float, sigma2: float, L: int, M: int,
                           hypothesis=Hypothesis.H1) -> tuple:
    """Correlation of T1's numerator and denominator, and their product moment.

    Under H1 ``E{wv} = T (L M sigma^2 + T + 2 sigma^2)`` and
    ``rho = 2 sigma^2 T / sqrt(2 L M sigma^6 T + 4 sigma^4 T^2)`` with
    ``T = tr(M M^H)``.  Under H0 the two are uncorrelated.
    """
    if traceMM < 0 or not sigma2 > 0:
        raise DomainError("need traceMM >= 0 and sigma2 > 0")
    T = float(traceMM)
    if Hypothesis(hypothesis) is Hypothesis.H0:
        return 0.0, -T * L * M * sigma2
    ewv = T * (L * M * sigma2 + T + 2.0 * sigma2)
    if T == 0:
        return 0.0, ewv
    if math.isinf(T):
        return 1.0, ewv
    rho = 2.0 * sigma2 * T / math.sqrt(2.0 * L * M * sigma2 ** 3 * T + 4.0 * sigma2 ** 2 * T * T)
    return min(rho, 1.0), ewv
