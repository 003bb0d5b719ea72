"""Scenario configuration, IRS-assisted channel draws and observation matrices.

The effective uplink channel is ``H = F Phi E + Dtilde * (1_M delta^T)``
(IRS cascade plus the masked direct paths).  Under H1 every column of the
observation matrix carries the same mean ``u = H P^{1/2} s``; under H0 the
columns are pure noise with covariance ``Sigma_n``.

All sampling routines take an explicit :class:`numpy.random.Generator`;
nothing reads global random state.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "Hypothesis",
    "NoiseModel",
    "SystemConfig",
    "ChannelRealization",
    "SignalSpec",
    "ObservationBatch",
    "WindowSpec",
    "WindowVerdict",
    "build_irs_phase",
    "nakagami_entries",
    "sample_channels",
    "effective_channel",
    "sample_powers",
    "default_signal",
    "noise_covariance",
    "generate_observation",
    "snr",
    "check_observation_window",
]


class Hypothesis(str, Enum):
    H0 = "H0"
    H1 = "H1"


@dataclass(frozen=True)
class NoiseModel:
    """Spatial noise model.

    ``kind`` is one of

    * ``"iid"``: ``sigma2 * I``;
    * ``"diagonal"``: per-antenna variances ``variances``;
    * ``"correlated"``: exponential profile ``sigma2 * rho**|i-j|``;
    * ``"uncalibrated"``: per-antenna variances drawn log-uniformly within
      ``+/- spread_db`` of ``sigma2``, once per scenario.
    """

    kind: str = "iid"
    sigma2: float = 1e-9  # -90 dBm expressed in mW
    variances: Optional[tuple] = None
    rho: float = 0.0
    spread_db: float = 3.0

    def __post_init__(self):
        if self.kind not in ("iid", "diagonal", "correlated", "uncalibrated"):
            raise ConfigurationError(f"unknown noise model {self.kind!r}", key="noise.model")
        if not self.sigma2 > 0:
            raise ConfigurationError("noise sigma2 must be > 0", key="noise.sigma2")
        if self.kind == "diagonal":
            if not self.variances or any(not v > 0 for v in self.variances):
                raise ConfigurationError("diagonal noise needs positive per-antenna variances",
                                         key="noise.variances")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigurationError("antenna correlation rho must lie in [0, 1)", key="noise.rho")
        if self.spread_db < 0:
            raise ConfigurationError("spread_db must be >= 0", key="noise.spread_db")


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions and statistical assumptions of one scenario."""

    M: int
    K: int
    L: int
    N: int = 16
    nakagami_m: float = 2.0
    reflection_amplitude: float = 0.8
    power_range_mw: tuple = (10.0, 50.0)
    noise: NoiseModel = field(default_factory=NoiseModel)
    direct_mask: Optional[tuple] = None
    resample_powers: bool = False
    base_seed: int = 2024

    def __post_init__(self):
        for name in ("M", "K", "L", "N"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigurationError(f"{name} must be an integer >= 1, got {value!r}", key=name)
        if not self.nakagami_m >= 0.5:
            raise ConfigurationError("nakagami_m must be >= 0.5", key="nakagami_m")
        if not 0.0 < self.reflection_amplitude <= 1.0:
            raise ConfigurationError("reflection_amplitude must lie in (0, 1]",
                                     key="reflection_amplitude")
        lo, hi = self.power_range_mw
        if not (0 < lo <= hi):
            raise ConfigurationError("power_range_mw must satisfy 0 < low <= high",
                                     key="power_range_mw")
        if self.direct_mask is not None:
            if len(self.direct_mask) != self.K or any(d not in (0, 1) for d in self.direct_mask):
                raise ConfigurationError("direct_mask must hold K binary flags", key="direct_mask")
        if self.noise.kind == "diagonal" and len(self.noise.variances) != self.M:
            raise ConfigurationError("diagonal noise needs M variances", key="noise.variances")
        if not 0 <= int(self.base_seed) < 2**64:
            raise ConfigurationError("base_seed must be a 64-bit unsigned integer", key="base_seed")

    @property
    def delta(self) -> np.ndarray:
        if self.direct_mask is None:
            return np.zeros(self.K, dtype=int)
        return np.asarray(self.direct_mask, dtype=int)

    def with_(self, **changes) -> "SystemConfig":
        """Copy with some fields replaced (the direct mask is resized if K changes)."""
        if "K" in changes and "direct_mask" not in changes and self.direct_mask is not None:
            k = changes["K"]
            flag = self.direct_mask[0] if len(set(self.direct_mask)) == 1 else 0
            changes["direct_mask"] = (flag,) * k
        if "M" in changes and self.noise.kind == "diagonal":
            raise ConfigurationError("cannot resize M with explicit per-antenna variances", key="M")
        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelRealization:
    E: np.ndarray        # N x K, device -> IRS
    F: np.ndarray        # M x N, IRS -> AP
    Dtilde: np.ndarray   # M x K, direct paths
    delta: np.ndarray    # K flags
    thetas: np.ndarray   # N phases
    Phi: np.ndarray      # N x N diagonal
    H: np.ndarray        # M x K effective channel


@dataclass(frozen=True)
class SignalSpec:
    """Known per-device signal values, powers (mW) and the effective channel."""

    s: np.ndarray
    powers: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        if np.any(~(np.asarray(self.powers) > 0)):
            raise ConfigurationError("transmit powers must be strictly positive", key="powers")

    @property
    def P(self) -> np.ndarray:
        return np.diag(self.powers)

    @property
    def G(self) -> np.ndarray:
        return self.H * np.sqrt(self.powers)[None, :]

    @property
    def u(self) -> np.ndarray:
        return self.H @ (np.sqrt(self.powers) * self.s)

    def Mmat(self, L: int) -> np.ndarray:
        return np.repeat(self.u[:, None], L, axis=1)


@dataclass(frozen=True)
class ObservationBatch:
    X: np.ndarray
    hypothesis: Hypothesis
    trial_index: int = 0


@dataclass(frozen=True)
class WindowSpec:
    taus: tuple
    T: float
    fs: float

    def __post_init__(self):
        if len(self.taus) == 0:
            raise DomainError("at least one delay is required")
        if any(t < 0 for t in self.taus) or self.T < 0 or not self.fs > 0:
            raise DomainError("delays and T must be >= 0 and fs > 0")


@dataclass(frozen=True)
class WindowVerdict:
    feasible: bool
    violated: Optional[str] = None


# --------------------------------------------------------------------------

def build_irs_phase(thetas, amplitude: float = 1.0) -> np.ndarray:
    """Diagonal reflection matrix with entries ``amplitude * exp(j theta_n)``."""
    if not 0.0 < amplitude <= 1.0:
        raise DomainError("reflection amplitude must lie in (0, 1]")
    thetas = np.asarray(thetas, dtype=float)
    return np.diag(amplitude * np.exp(1j * thetas))


def nakagami_entries(rng: np.random.Generator, shape, m: float = 2.0,
                     omega: float = 1.0) -> np.ndarray:
    """Complex entries with Nakagami-m amplitude (``E|h|^2 = omega``) and uniform phase."""
    amplitude = np.sqrt(rng.gamma(m, omega / m, size=shape))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    return amplitude * np.exp(1j * phase)


def effective_channel(real: ChannelRealization) -> np.ndarray:
    """``F Phi E + Dtilde * (1_M delta^T)``."""
    F, Phi, E, D = real.F, real.Phi, real.E, real.Dtilde
    M, N = F.shape
    if Phi.shape != (N, N) or E.shape[0] != N or D.shape != (M, E.shape[1]):
        raise DomainError("channel matrix dimensions are inconsistent")
    mask = np.asarray(real.delta, dtype=float)[None, :]
    return F @ Phi @ E + D * mask


def sample_channels(config: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one realization of ``(E, F, Dtilde, Phi)`` and assemble ``H``.

    The draw order is fixed (E, F, Dtilde, thetas) so identical generator
    states give bit-identical realizations.
    """
    m = config.nakagami_m
    E = nakagami_entries(rng, (config.N, config.K), m)
    F = nakagami_entries(rng, (config.M, config.N), m)
    D = nakagami_entries(rng, (config.M, config.K), m)
    thetas = rng.uniform(0.0, 2.0 * np.pi, size=config.N)
    Phi = build_irs_phase(thetas, config.reflection_amplitude)
    delta = config.delta
    partial = ChannelRealization(E=E, F=F, Dtilde=D, delta=delta, thetas=thetas, Phi=Phi,
                                 H=np.empty((config.M, config.K), dtype=complex))
    return replace(partial, H=effective_channel(partial))


def sample_powers(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    lo, hi = config.power_range_mw
    return rng.uniform(lo, hi, size=config.K)


def default_signal(K: int) -> np.ndarray:
    """All-ones K-vector scaled to unit energy."""
    return np.full(K, 1.0 / np.sqrt(K), dtype=complex)


def noise_covariance(config: SystemConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Build ``Sigma_n`` from the configured noise model.

    The uncalibrated model consumes ``M`` uniforms from ``rng``.
    """
    nm, M = config.noise, config.M
    if nm.kind == "iid":
        cov = nm.sigma2 * np.eye(M)
    elif nm.kind == "diagonal":
        cov = np.diag(np.asarray(nm.variances, dtype=float))
    elif nm.kind == "correlated":
        idx = np.arange(M)
        cov = nm.sigma2 * nm.rho ** np.abs(idx[:, None] - idx[None, :])
    else:
        if rng is None:
            raise ConfigurationError("uncalibrated noise needs a random stream", key="noise.model")
        offsets_db = rng.uniform(-nm.spread_db, nm.spread_db, size=M)
        cov = np.diag(nm.sigma2 * 10.0 ** (offsets_db / 10.0))
    return cov.astype(complex)


def _noise_factor(noise_cov: np.ndarray) -> Optional[np.ndarray]:
    if not np.any(noise_cov):
        return None
    try:
        return np.linalg.cholesky(noise_cov)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("noise covariance is not positive definite",
                                 key="noise") from exc


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian samples (unit variance)."""
    raw = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    return (raw[..., 0] + 1j * raw[..., 1]) * np.sqrt(0.5)


def generate_observation(signal: SignalSpec, config: SystemConfig, hypothesis,
                         rng: np.random.Generator, noise_cov: Optional[np.ndarray] = None,
                         trial_index: int = 0) -> ObservationBatch:
    """Draw ``X = N`` (H0) or ``X = u 1^T + N`` (H1).

    ``noise_cov`` overrides the configured covariance; an all-zero matrix
    gives noiseless observations.
    """
    hypothesis = Hypothesis(hypothesis)
    if noise_cov is None:
        noise_cov = noise_covariance(config, rng)
    factor = _noise_factor(np.asarray(noise_cov))
    M, L = config.M, config.L
    if factor is None:
        X = np.zeros((M, L), dtype=complex)
    else:
        X = factor @ complex_normal(rng, (M, L))
    if hypothesis is Hypothesis.H1:
        X = X + signal.Mmat(L)
    return ObservationBatch(X=X, hypothesis=hypothesis, trial_index=trial_index)


def snr(signal_or_u, noise_cov) -> tuple:
    """Average SNR ``||u||^2 / tr(Sigma_n)`` as ``(linear, dB)``."""
    u = signal_or_u.u if isinstance(signal_or_u, SignalSpec) else np.asarray(signal_or_u)
    tr = float(np.real(np.trace(noise_cov)))
    if not tr > 0:
        raise ConfigurationError("noise covariance trace must be positive", key="noise")
    lin = float(np.vdot(u, u).real) / tr
    db = 10.0 * np.log10(lin) if lin > 0 else -np.inf
    return lin, db


def check_observation_window(spec: WindowSpec, T_len: float, L: int) -> WindowVerdict:
    """Check that the window ``[T_len, T_len + L/fs]`` captures every delayed arrival."""
    taus = np.asarray(spec.taus, dtype=float)
    if taus.size == 0:
        raise DomainError("empty delay list")
    if not taus.min() <= T_len:
        return WindowVerdict(False, "min(tau) <= T")
    if not T_len + L / spec.fs >= taus.max():
        return WindowVerdict(False, "T + L/fs >= max(tau)")
    return WindowVerdict(True)


def scale_noise_to_snr(noise_cov: np.ndarray, signal_energy: float, snr_db: float) -> np.ndarray:
    """Rescale ``noise_cov`` so that ``signal_energy / tr(Sigma_n)`` equals the target."""
    target = 10.0 ** (snr_db / 10.0)
    tr = float(np.real(np.trace(noise_cov)))
    if not (tr > 0 and signal_energy > 0):
        raise ConfigurationError("cannot target an SNR without signal and noise energy",
                                 key="snr_db")
    return noise_cov * (signal_energy / (target * tr))


def mean_signal_energy(config: SystemConfig, powers: np.ndarray, s: np.ndarray) -> float:
    """``E ||u||^2`` over fading for unit-power channel entries.

    ``E|h_mk|^2 = N a^2 + delta_k`` with reflection amplitude ``a``.
    """
    gain = config.N * config.reflection_amplitude ** 2 + config.delta
    return float(config.M * np.sum(powers * np.abs(s) ** 2 * gain))

