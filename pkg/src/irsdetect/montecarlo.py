"""Monte Carlo engine: threshold calibration, operating points, ROC curves
and parameter sweeps.

Randomness is organised in fixed-size blocks of trials.  Block ``j`` of
stream ``tag`` draws from ``PCG64(SeedSequence(seed, spawn_key=(tag, j)))``,
so the statistics of a run do not depend on how many worker threads
process the blocks or in which order, and the first ``n`` trials of a run
are the same whatever the total trial count.  The SNR is not part of the
key; scenarios that differ only in SNR share their noise draws.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from . import analytic as an
from .channel import (
    Hypothesis,
    SignalSpec,
    SystemConfig,
    complex_normal,
    default_signal,
    mean_signal_energy,
    noise_covariance,
    sample_channels,
    sample_powers,
    scale_noise_to_snr,
)
from .detectors import DetectorKind, KnownSideInfo, evaluate_many
from .errors import (CalibrationError, ConfigurationError, DomainError, IrsDetectError,
                     RankDeficiencyError, tag_coordinates)

__all__ = [
    "BLOCK",
    "Scenario",
    "OperatingPoint",
    "PerformanceCurve",
    "Calibration",
    "SweepResult",
    "block_rng",
    "make_scenario",
    "simulate",
    "calibrate_threshold",
    "estimate_operating_point",
    "roc_curve",
    "sweep",
    "wilson_interval",
    "snr_at_pd",
]

BLOCK = 4096
TAG_H0, TAG_H1, TAG_CHANNEL, TAG_FADING = 0, 1, 2, 3
AXES = ("threshold", "snr_db", "M", "K", "L", "pfa")


def block_rng(seed: int, tag: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), int(block)))))


def _default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


# --------------------------------------------------------------------------
# scenario

@dataclass(frozen=True)
class Scenario:
    """One detection experiment: configuration, realized signal, noise and detector.

    With ``fading="per_trial"`` the stored channel is only used to size the
    problem; every trial draws a fresh channel (and, if the configuration
    asks for it, fresh powers).
    """

    config: SystemConfig
    signal: SignalSpec
    noise_cov: np.ndarray
    detector: DetectorKind = DetectorKind.Opt
    snr_override_db: Optional[float] = None
    fading: str = "fixed"

    def __post_init__(self):
        if self.fading not in ("fixed", "per_trial"):
            raise ConfigurationError("fading must be 'fixed' or 'per_trial'", key="fading")
        object.__setattr__(self, "detector", DetectorKind(self.detector))

    @property
    def side_info(self) -> KnownSideInfo:
        return KnownSideInfo(Mmat=self.signal.Mmat(self.config.L), noise_cov=self.noise_cov,
                             s=self.signal.s, H=self.signal.H)

    @property
    def u(self) -> np.ndarray:
        return self.signal.u

    def with_detector(self, detector) -> "Scenario":
        return replace(self, detector=DetectorKind(detector))

    def at_snr(self, snr_db: float) -> "Scenario":
        """Rescale the noise covariance to hit ``snr_db``.

        Fixed channels use the realized ``||u||^2``; per-trial fading uses its
        average over channel draws.
        """
        if self.fading == "fixed":
            energy = float(np.vdot(self.u, self.u).real)
        else:
            energy = mean_signal_energy(self.config, self.signal.powers, self.signal.s)
        cov = scale_noise_to_snr(self.noise_cov, energy, snr_db)
        return replace(self, noise_cov=cov, snr_override_db=float(snr_db))

    def analytic(self) -> an.AnalyticParams:
        return an.analytic_params(self.u, self.noise_cov, self.config.L)


def make_scenario(config: SystemConfig, detector=DetectorKind.Opt, snr_db: Optional[float] = None,
                  fading: str = "fixed", s: Optional[np.ndarray] = None) -> Scenario:
    """Draw the scenario's channel, powers and noise covariance from ``config.base_seed``."""
    rng = block_rng(config.base_seed, TAG_CHANNEL, 0)
    real = sample_channels(config, rng)
    powers = sample_powers(config, rng)
    cov = noise_covariance(config, rng)
    s = default_signal(config.K) if s is None else np.asarray(s, dtype=complex)
    if s.shape != (config.K,):
        raise ConfigurationError("signal vector must have K entries", key="s")
    sc = Scenario(config=config, signal=SignalSpec(s=s, powers=powers, H=real.H),
                  noise_cov=cov, detector=detector, fading=fading)
    return sc if snr_db is None else sc.at_snr(snr_db)


# --------------------------------------------------------------------------
# trial generation

def _noise_block(rng, factor, n, M, L):
    return factor @ complex_normal(rng, (n, M, L))


def _fading_means(scenario: Scenario, seed: int, block: int, n: int) -> np.ndarray:
    """Per-trial mean columns ``u_t`` for the per-trial fading mode."""
    cfg = scenario.config
    rng = block_rng(seed, TAG_FADING, block)
    out = np.empty((n, cfg.M), dtype=complex)
    for t in range(n):
        H = sample_channels(cfg, rng).H
        p = sample_powers(cfg, rng) if cfg.resample_powers else scenario.signal.powers
        out[t] = H @ (np.sqrt(p) * scenario.signal.s)
    return out


def _stats_fading(kinds, X, U, cov, L):
    """Statistics when each trial has its own mean column ``U[t]``.

    The matched filter is divided by ``sqrt(2 Re b_t)`` so that one threshold
    applies to every trial.
    """
    out = {}
    blind = [k for k in kinds if k in (DetectorKind.T3Rao, DetectorKind.T3Glrt, DetectorKind.T2)]
    if blind:
        out.update(evaluate_many(blind, X, KnownSideInfo(noise_cov=cov)))
    y = X.sum(axis=2)
    energy = np.sum(X.real ** 2 + X.imag ** 2, axis=(1, 2))
    match = np.real(np.einsum("tm,tm->t", U.conj(), y))
    mm = L * np.sum(np.abs(U) ** 2, axis=1)
    for kind in kinds:
        if kind is DetectorKind.Opt:
            A = np.linalg.solve(cov, U.T).T
            b = L * np.real(np.einsum("tm,tm->t", U.conj(), A))
            out[kind] = 2.0 * np.real(np.einsum("tm,tm->t", A.conj(), y)) / np.sqrt(2.0 * b)
        elif kind is DetectorKind.T1:
            out[kind] = (2.0 * match - mm) / energy
        elif kind is DetectorKind.T1LowSnr:
            out[kind] = match / energy
        elif kind is DetectorKind.T1LargeL:
            out[kind] = match / L
    return out


def _run_block(scenario: Scenario, kinds, hypothesis: Hypothesis, seed: int, block: int, n: int):
    cfg = scenario.config
    M, L = cfg.M, cfg.L
    tag = TAG_H1 if hypothesis is Hypothesis.H1 else TAG_H0
    rng = block_rng(seed, tag, block)
    try:
        factor = np.linalg.cholesky(scenario.noise_cov)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("noise covariance is not positive definite") from exc
    X = _noise_block(rng, factor, n, M, L)
    if scenario.fading == "fixed":
        if hypothesis is Hypothesis.H1:
            X += scenario.u[None, :, None]
        return evaluate_many(kinds, X, scenario.side_info)
    U = _fading_means(scenario, seed, block, n)
    if hypothesis is Hypothesis.H1:
        X += U[:, :, None]
    return _stats_fading(kinds, X, U, scenario.noise_cov, L)


def simulate(scenario: Scenario, hypothesis, trials: int, seed: int,
             detectors: Optional[Sequence] = None, workers: Optional[int] = None
             ) -> Dict[DetectorKind, np.ndarray]:
    """Statistic values of ``trials`` independent draws under ``hypothesis``.

    ``detectors`` defaults to the scenario's detector.  The output is
    identical for any ``workers`` value.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    hypothesis = Hypothesis(hypothesis)
    kinds = [DetectorKind(k) for k in (detectors or [scenario.detector])]
    sizes = [min(BLOCK, trials - j * BLOCK) for j in range(math.ceil(trials / BLOCK))]
    workers = _default_workers() if workers is None else int(workers)

    def job(j):
        try:
            return _run_block(scenario, kinds, hypothesis, seed, j, sizes[j])
        except IrsDetectError as err:
            raise tag_coordinates(err, hypothesis=hypothesis.name, seed=seed, block=j)

    if workers == 1 or len(sizes) == 1:
        parts = [job(j) for j in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    return {k: np.concatenate([p[k] for p in parts]) for k in kinds}


# --------------------------------------------------------------------------
# estimates

def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple:
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    pfa_hat: float
    pd_hat: float
    pfa_ci: tuple
    pd_ci: tuple
    trials: int
    # pd interval widened for the threshold's own calibration error; only
    # set when the threshold came from an empirical quantile
    pd_band: Optional[tuple] = None

    def __post_init__(self):
        pairs = [(self.pfa_hat, self.pfa_ci), (self.pd_hat, self.pd_ci)]
        if self.pd_band is not None:
            pairs.append((self.pd_hat, self.pd_band))
        for est, (lo, hi) in pairs:
            if not (0.0 <= lo <= est <= hi <= 1.0):
                raise DomainError("estimate must lie inside its interval within [0, 1]")

    @property
    def pd_joint(self) -> tuple:
        """Widest available pd interval."""
        return self.pd_ci if self.pd_band is None else self.pd_band

    @classmethod
    def from_counts(cls, threshold, fa: int, det: int, trials: int,
                    trials_h1: Optional[int] = None) -> "OperatingPoint":
        n1 = trials if trials_h1 is None else trials_h1
        pfa, pd = fa / trials, det / n1
        lo0, hi0 = wilson_interval(fa, trials)
        lo1, hi1 = wilson_interval(det, n1)
        # guard against round-off at the edges
        return cls(float(threshold), pfa, pd, (min(lo0, pfa), max(hi0, pfa)),
                   (min(lo1, pd), max(hi1, pd)), int(trials))


@dataclass(frozen=True)
class PerformanceCurve:
    axis: str
    points: List[tuple]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.axis not in AXES:
            raise DomainError(f"unknown axis {self.axis!r}")
        xs = [x for x, _ in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise DomainError("curve abscissae must be strictly increasing")

    @property
    def x(self) -> np.ndarray:
        return np.array([x for x, _ in self.points], dtype=float)

    @property
    def pd(self) -> np.ndarray:
        return np.array([p.pd_hat for _, p in self.points])

    @property
    def pfa(self) -> np.ndarray:
        return np.array([p.pfa_hat for _, p in self.points])


@dataclass(frozen=True)
class Calibration:
    threshold: float
    target_pfa: float
    trials: int
    analytic: dict
    # order statistics at the Wilson limits of target_pfa: a distribution-free
    # 95% interval for the true quantile
    threshold_band: tuple = (-np.inf, np.inf)


def _analytic_thresholds(scenario: Scenario, pfa: float) -> dict:
    kind, cfg = scenario.detector, scenario.config
    out = {}
    if scenario.fading != "fixed":
        if kind is DetectorKind.Opt:
            out["gaussian"] = an.sf.inv_q(pfa)
        elif kind is DetectorKind.T2:
            out["gamma"] = an.t2_threshold(pfa, cfg.L, cfg.M)
        return out
    if kind is DetectorKind.Opt:
        out["gaussian"] = an.opt_threshold(pfa, scenario.analytic().b)
    elif kind is DetectorKind.T2:
        out["gamma"] = an.t2_threshold(pfa, cfg.L, cfg.M)
    elif kind is DetectorKind.T1 and scenario.noise_cov is not None:
        p = scenario.analytic()
        try:
            out["gaussian_ratio"] = an.t1_threshold(pfa, p.traceMM, p.sigma2, cfg.L, cfg.M)
        except DomainError:
            pass
    elif kind is DetectorKind.T3Rao and cfg.L > cfg.M:
        out["scaled_fisher"] = an.rao_threshold_exact(pfa, cfg.L, cfg.M)
        out["beta"] = an.rao_null_beta_threshold(pfa, cfg.L, cfg.M)
        out["chi2_asymptotic"] = an.rao_asymptotic_threshold(pfa, cfg.M)
    elif kind is DetectorKind.T3Glrt and cfg.L > cfg.M:
        out["beta"] = an.glrt_null_threshold(pfa, cfg.L, cfg.M)
    return out


def _order_threshold(sorted_h0: np.ndarray, pfa: float) -> float:
    """Order statistic with exactly ``floor(pfa * n)`` pool values above it (barring ties)."""
    n = sorted_h0.size
    r = int(math.floor(pfa * n))
    if r >= n:
        return -np.inf
    return float(sorted_h0[n - r - 1])


def calibrate_threshold(scenario: Scenario, target_pfa: float, trials: int, seed: int,
                        workers: Optional[int] = None) -> Calibration:
    """Empirical ``1 - target_pfa`` quantile of the H0 statistic."""
    if not 0.0 < target_pfa < 1.0:
        raise DomainError("target_pfa must lie in (0, 1)")
    if trials < 100.0 / target_pfa:
        raise CalibrationError(
            f"{trials} H0 trials are too few for pfa={target_pfa}; need >= {100 / target_pfa:.0f}")
    h0 = np.sort(simulate(scenario, Hypothesis.H0, trials, seed, workers=workers)[scenario.detector])
    tau = _order_threshold(h0, target_pfa)
    lo, hi = wilson_interval(int(math.floor(target_pfa * trials)), trials)
    band = (_order_threshold(h0, hi), _order_threshold(h0, lo))
    return Calibration(tau, target_pfa, trials, _analytic_thresholds(scenario, target_pfa), band)


def estimate_operating_point(scenario: Scenario, threshold: float, trials: int, seed: int,
                             workers: Optional[int] = None,
                             threshold_band: Optional[tuple] = None) -> OperatingPoint:
    """Exceedance rates of ``threshold`` under H0 and H1 with Wilson 95% intervals.

    Given a ``threshold_band`` (see `Calibration`), the point also carries
    ``pd_band``: the Wilson limits of pd evaluated at the two band edges.
    """
    kind = scenario.detector
    h0 = simulate(scenario, Hypothesis.H0, trials, seed, workers=workers)[kind]
    h1 = simulate(scenario, Hypothesis.H1, trials, seed, workers=workers)[kind]
    det = int(np.count_nonzero(h1 > threshold))
    op = OperatingPoint.from_counts(threshold, int(np.count_nonzero(h0 > threshold)), det, trials)
    if threshold_band is None:
        return op
    t_lo, t_hi = threshold_band
    lo = wilson_interval(int(np.count_nonzero(h1 > t_hi)), trials)[0]
    hi = wilson_interval(int(np.count_nonzero(h1 > t_lo)), trials)[1]
    return replace(op, pd_band=(min(lo, op.pd_ci[0]), max(hi, op.pd_ci[1])))


def roc_from_pools(h0: np.ndarray, h1: np.ndarray, pfa_grid: Sequence[float]) -> PerformanceCurve:
    grid = np.asarray(pfa_grid, dtype=float)
    if np.any((grid <= 0) | (grid >= 1)) or np.any(np.diff(grid) <= 0):
        raise DomainError("pfa grid must be increasing inside (0, 1)")
    s0, s1 = np.sort(h0), np.sort(h1)
    points = []
    for p in grid:
        tau = _order_threshold(s0, p)
        fa = s0.size - np.searchsorted(s0, tau, side="right")
        det = s1.size - np.searchsorted(s1, tau, side="right")
        points.append((float(p), OperatingPoint.from_counts(tau, int(fa), int(det), s0.size,
                                                            s1.size)))
    return PerformanceCurve("pfa", points)


def roc_curve(scenario: Scenario, pfa_grid: Sequence[float], trials: int, seed: int,
              workers: Optional[int] = None) -> PerformanceCurve:
    """ROC from one shared pool of H0 and H1 statistics."""
    kind = scenario.detector
    h0 = simulate(scenario, Hypothesis.H0, trials, seed, workers=workers)[kind]
    h1 = simulate(scenario, Hypothesis.H1, trials, seed, workers=workers)[kind]
    curve = roc_from_pools(h0, h1, pfa_grid)
    return replace(curve, meta={"detector": kind.value, "trials": trials, "seed": seed})


def roc_auc(h0: np.ndarray, h1: np.ndarray) -> float:
    """Area under the empirical ROC (Mann-Whitney form, ties count one half)."""
    return float(stats.mannwhitneyu(h1, h0, alternative="greater").statistic
                 / (h0.size * h1.size))


# --------------------------------------------------------------------------
# sweeps

def snr_at_pd(snr_db: np.ndarray, pd: np.ndarray, target: float = 0.9) -> Optional[float]:
    """SNR where a pd-vs-SNR curve first crosses ``target`` (linear interpolation).

    Returns None when the curve never crosses or is not monotone around the
    crossing.
    """
    snr_db, pd = np.asarray(snr_db, float), np.asarray(pd, float)
    above = np.nonzero(pd >= target)[0]
    if above.size == 0 or above[0] == 0:
        return None
    i = above[0]
    if np.any(pd[i:] < target):
        return None
    x0, x1, y0, y1 = snr_db[i - 1], snr_db[i], pd[i - 1], pd[i]
    if y1 <= y0:
        return None
    return float(x0 + (target - y0) * (x1 - x0) / (y1 - y0))


@dataclass(frozen=True)
class SweepResult:
    axis: str
    values: tuple
    snr_grid: tuple
    curves: Dict
    snr_at_target: Dict
    shift_db: Optional[float]
    increments_db: tuple
    detector: str
    target_pfa: float
    target_pd: float = 0.9


def sweep(template: Scenario, axis: str, values: Sequence, target_pfa: float, trials: int,
          seed: int, snr_grid: Optional[Sequence[float]] = None, target_pd: float = 0.9,
          workers: Optional[int] = None) -> SweepResult:
    """Pd-vs-SNR curves for each ``axis`` value and the SNR shift at ``target_pd``.

    Each curve point calibrates its own threshold on H0 trials and then
    estimates pd.  For ``axis="snr_db"`` the values are the SNR grid of a
    single curve.
    """
    if axis not in ("M", "K", "L", "snr_db"):
        raise DomainError("sweep axis must be one of M, K, L, snr_db")
    values = list(values)
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise DomainError("sweep values must be non-empty and increasing")
    if axis == "snr_db":
        snr_grid, values = values, [None]
    elif snr_grid is None:
        snr_grid = np.arange(-25.0, 5.01, 1.0)
    snr_grid = [float(v) for v in snr_grid]
    curves, at_target = {}, {}
    for v in values:
        if v is None:
            base = template
        else:
            try:
                cfg = template.config.with_(**{axis: int(v)})
                base = make_scenario(cfg, template.detector, fading=template.fading)
            except IrsDetectError as err:
                raise tag_coordinates(err, axis=axis, axis_value=v)
        points = []
        for snr in snr_grid:
            try:
                sc = base.at_snr(snr)
                cal = calibrate_threshold(sc, target_pfa, trials, seed, workers=workers)
                # fresh streams for estimation so pfa_hat is an honest check
                op = estimate_operating_point(sc, cal.threshold, trials, seed + 1,
                                              workers=workers, threshold_band=cal.threshold_band)
            except IrsDetectError as err:
                raise tag_coordinates(err, axis=axis, axis_value=v, snr_db=snr, seed=seed)
            points.append((snr, op))
        key = "curve" if v is None else int(v)
        curves[key] = PerformanceCurve("snr_db", points, {"axis": axis, "value": v})
        at_target[key] = snr_at_pd(np.array(snr_grid), curves[key].pd, target_pd)
    keys = list(curves)
    shift = None
    increments = ()
    if axis != "snr_db":
        firsts = [at_target[k] for k in keys]
        if firsts[0] is not None and firsts[-1] is not None:
            shift = firsts[0] - firsts[-1]
        increments = tuple(None if a is None or b is None else a - b
                           for a, b in zip(firsts, firsts[1:]))
    return SweepResult(axis, tuple(values), tuple(snr_grid), curves, at_target, shift,
                       increments, template.detector.value, target_pfa, target_pd)
