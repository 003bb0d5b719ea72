"""Special functions and distribution tails used by the closed-form analysis.

Everything here is pure and stateless.  Forward evaluations of the
regularized incomplete gamma and beta functions are delegated to
:mod:`scipy.special`; the Gaussian tail, the Poisson-mixture series behind
the generalized Marcum-Q function and the non-central beta law, and all
inverse functions are implemented here.

Inverses use bracketing root search (Brent's method: bisection safeguarded
secant / inverse-quadratic steps) on the logarithm of the tail, so small
probabilities are recovered to relative accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import ConvergenceError, DomainError

__all__ = [
    "Tolerance",
    "DEFAULT_TOLERANCE",
    "q_function",
    "inv_q",
    "gamma_upper_reg",
    "reg_inc_beta",
    "reg_inc_beta_complement",
    "poisson_mixture",
    "marcum_q",
    "noncentral_beta_sf",
    "dist_cdf",
    "dist_sf",
]

_Q_SATURATION = 40.0


@dataclass(frozen=True)
class Tolerance:
    """Accuracy targets for series truncation and root finding."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_terms: int = 10_000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("tolerances must be strictly positive")
        if int(self.max_terms) < 1:
            raise DomainError("max_terms must be >= 1")


DEFAULT_TOLERANCE = Tolerance()


def _scalar_or_array(values, like):
    if np.ndim(like) == 0:
        return float(values)
    return values


# --------------------------------------------------------------------------
# Gaussian tail
# --------------------------------------------------------------------------

def q_function(x):
    """Standard normal upper tail ``Q(x) = P(Z > x)``.

    Accepts scalars or arrays.  Saturates to exactly 0 / 1 for
    ``|x| >= 40``, which also covers the infinite limits.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("q_function argument is NaN")
    out = 0.5 * special.erfc(arr / math.sqrt(2.0))
    out = np.where(arr >= _Q_SATURATION, 0.0, out)
    out = np.where(arr <= -_Q_SATURATION, 1.0, out)
    return _scalar_or_array(out, x)


def _log_q(x):
    return special.log_ndtr(-x)


def _brent_log(fun_log, log_target, lo, hi, *, expand_lo=True, expand_hi=True,
               lo_limit=-np.inf, hi_limit=np.inf, xtol=1e-300, rtol=1e-15,
               max_expand=200):
    """Root of ``fun_log(x) - log_target`` with automatic bracket expansion.

    ``fun_log`` must be monotone on the search interval.
    """

    def g(t):
        return fun_log(t) - log_target

    g_lo, g_hi = g(lo), g(hi)
    n = 0
    while np.sign(g_lo) == np.sign(g_hi) and n < max_expand:
        n += 1
        width = hi - lo
        if expand_lo and lo > lo_limit:
            lo = max(lo - width, lo_limit)
            g_lo = g(lo)
        if expand_hi and hi < hi_limit:
            hi = min(hi + 2 * width, hi_limit)
            g_hi = g(hi)
    if g_lo == 0:
        return lo
    if g_hi == 0:
        return hi
    if np.sign(g_lo) == np.sign(g_hi):
        raise DomainError("could not bracket the inverse; target out of range")
    return optimize.brentq(g, lo, hi, xtol=xtol, rtol=max(rtol, 4 * np.finfo(float).eps),
                           maxiter=500)


def inv_q(p, tol: Tolerance = DEFAULT_TOLERANCE):
    """Inverse Gaussian tail: returns ``x`` with ``Q(x) = p``."""
    if np.ndim(p) > 0:
        return np.array([inv_q(float(v), tol) for v in np.ravel(p)]).reshape(np.shape(p))
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"inv_q requires 0 < p < 1, got {p}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -inv_q(1.0 - p, tol) if 1.0 - p > 0 else -_Q_SATURATION
    return _brent_log(_log_q, math.log(p), 0.0, 8.0, expand_lo=False,
                      rtol=min(tol.rel_tol, 1e-14))


# --------------------------------------------------------------------------
# Incomplete gamma / beta
# --------------------------------------------------------------------------

def gamma_upper_reg(a, x, invert: bool = False, tol: Tolerance = DEFAULT_TOLERANCE):
    """Regularized upper incomplete gamma ``Gamma(a, x) / Gamma(a)``.

    With ``invert=True`` the second argument is a probability ``p`` in
    (0, 1] and the function returns ``x`` such that the forward value
    equals ``p``.
    """
    a_arr = np.asarray(a, dtype=float)
    if np.any(~(a_arr > 0)):
        raise DomainError("gamma_upper_reg requires a > 0")
    if not invert:
        x_arr = np.asarray(x, dtype=float)
        if np.any(~(x_arr >= 0)):
            raise DomainError("gamma_upper_reg requires x >= 0")
        return _scalar_or_array(special.gammaincc(a_arr, x_arr), np.broadcast(a, x))

    if np.ndim(x) > 0 or np.ndim(a) > 0:
        aa, pp = np.broadcast_arrays(a_arr, np.asarray(x, dtype=float))
        return np.array([gamma_upper_reg(float(ai), float(pi), True, tol)
                         for ai, pi in zip(aa.ravel(), pp.ravel())]).reshape(aa.shape)
    p = float(x)
    a = float(a)
    if not (0.0 < p <= 1.0):
        raise DomainError(f"inverse gamma_upper_reg requires p in (0, 1], got {p}")
    if p == 1.0:
        return 0.0
    guess = float(special.gammainccinv(a, p))
    if not np.isfinite(guess) or guess <= 0:
        guess = a
    lo, hi = guess * 0.5, guess * 1.5 + 1e-300

    def log_tail(t):
        with np.errstate(divide="ignore"):
            return math.log(special.gammaincc(a, t)) if special.gammaincc(a, t) > 0 else -np.inf

    return _brent_log(log_tail, math.log(p), lo, hi, lo_limit=0.0,
                      rtol=min(tol.rel_tol, 1e-14))


def reg_inc_beta(a, b, x):
    """Regularized incomplete beta ``I(a, b; x)``."""
    a_arr, b_arr, x_arr = (np.asarray(v, dtype=float) for v in (a, b, x))
    if np.any(~(a_arr > 0)) or np.any(~(b_arr > 0)):
        raise DomainError("reg_inc_beta requires a, b > 0")
    if np.any(~((x_arr >= 0) & (x_arr <= 1))):
        raise DomainError("reg_inc_beta requires 0 <= x <= 1")
    return _scalar_or_array(special.betainc(a_arr, b_arr, x_arr), np.broadcast(a, b, x))


def reg_inc_beta_complement(a, b, x):
    """``1 - I(a, b; x)`` evaluated without cancellation (as ``I(b, a; 1 - x)``)."""
    a_arr, b_arr, x_arr = (np.asarray(v, dtype=float) for v in (a, b, x))
    if np.any(~(a_arr > 0)) or np.any(~(b_arr > 0)):
        raise DomainError("reg_inc_beta requires a, b > 0")
    if np.any(~((x_arr >= 0) & (x_arr <= 1))):
        raise DomainError("reg_inc_beta requires 0 <= x <= 1")
    return _scalar_or_array(special.betaincc(a_arr, b_arr, x_arr), np.broadcast(a, b, x))


# --------------------------------------------------------------------------
# Poisson mixtures: Marcum-Q and the non-central beta tail
# --------------------------------------------------------------------------

def poisson_mixture(mu: float, term, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Evaluate ``sum_k Pois(k; mu) * term(k)`` for terms bounded in [0, 1].

    ``term`` maps an integer array ``k`` to values in [0, 1].  The window of
    indices is centred on the Poisson mode and widened until the Poisson
    mass left outside it (an upper bound on the neglected part, since every
    term is at most 1) is below ``rel_tol`` of the accumulated sum, or below
    ``abs_tol * 1e-300`` when the sum itself underflows.
    """
    if mu < 0 or not np.isfinite(mu):
        raise DomainError("Poisson mean must be finite and non-negative")
    if mu == 0.0:
        return float(term(np.array([0]))[0])

    mode = math.floor(mu)
    half = int(math.ceil(8.0 * math.sqrt(mu) + 16))
    total = 0.0
    while True:
        k_lo = max(0, mode - half)
        k_hi = mode + half
        if k_hi - k_lo + 1 > tol.max_terms:
            raise ConvergenceError(
                f"Poisson mixture needs more than {tol.max_terms} terms", partial=total)
        k = np.arange(k_lo, k_hi + 1)
        logw = -mu + k * math.log(mu) - special.gammaln(k + 1.0)
        w = np.exp(logw)
        t = np.asarray(term(k), dtype=float)
        total = float(np.sum(w * t))
        # neglected Poisson mass on both sides of the window
        left = special.pdtr(k_lo - 1, mu) if k_lo > 0 else 0.0
        right = special.pdtrc(k_hi, mu)
        neglected = left + right
        if neglected <= tol.rel_tol * 1e-3 * total or neglected < 1e-300:
            return total
        if k_lo == 0 and right <= tol.rel_tol * 1e-3 * total:
            return total
        half *= 2


def marcum_q(order, a, b, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Generalized Marcum-Q function ``Q_M(a, b)`` for integer order ``M >= 1``.

    Evaluated as the Poisson mixture of regularized upper incomplete gamma
    functions ``sum_k Pois(k; a^2/2) Gamma(M + k, b^2/2) / Gamma(M + k)``,
    which is the Bessel-series expansion regrouped so that every term is
    positive.
    """
    if int(order) != order or order < 1:
        raise DomainError("Marcum-Q order must be a positive integer")
    if a < 0 or b < 0:
        raise DomainError("Marcum-Q arguments must be non-negative")
    if b == 0:
        return 1.0
    x = 0.5 * b * b
    mu = 0.5 * a * a
    return poisson_mixture(mu, lambda k: special.gammaincc(order + k, x), tol)


def noncentral_beta_sf(a: float, b: float, lam: float, x: float,
                       tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Upper tail of the type-I non-central beta law ``B(a, b; lam)`` at ``x``."""
    if a <= 0 or b <= 0 or lam < 0:
        raise DomainError("non-central beta requires a, b > 0 and lam >= 0")
    if not 0 <= x <= 1:
        raise DomainError("non-central beta support is [0, 1]")
    if x == 0:
        return 1.0
    if x == 1:
        return 0.0
    return poisson_mixture(0.5 * lam, lambda k: special.betaincc(a + k, b, x), tol)


# --------------------------------------------------------------------------
# Distribution CDFs
# --------------------------------------------------------------------------

def _check_dof(**params):
    for name, value in params.items():
        if value is None or not value >= 1:
            raise DomainError(f"{name} must be >= 1")


def dist_sf(kind: str, x: float, *, dof=None, lam=0.0, d1=None, d2=None,
            tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Survival function ``P(X > x)`` for the supported families.

    ``kind`` is one of ``"central_chi2"`` (``dof``), ``"noncentral_chi2"``
    (``dof``, ``lam``) or ``"fisher"`` (``d1``, ``d2``).
    """
    if kind == "central_chi2":
        _check_dof(dof=dof)
        return 1.0 if x <= 0 else gamma_upper_reg(0.5 * dof, 0.5 * x)
    if kind == "noncentral_chi2":
        _check_dof(dof=dof)
        if lam < 0:
            raise DomainError("non-centrality must be >= 0")
        if x <= 0:
            return 1.0
        if dof % 2 == 0:
            return marcum_q(dof // 2, math.sqrt(lam), math.sqrt(x), tol)
        # odd dof: same Poisson mixture with a half-integer gamma order
        return poisson_mixture(0.5 * lam,
                               lambda k: special.gammaincc(0.5 * dof + k, 0.5 * x), tol)
    if kind == "fisher":
        _check_dof(d1=d1, d2=d2)
        if x <= 0:
            return 1.0
        return reg_inc_beta_complement(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2))
    raise DomainError(f"unknown distribution kind {kind!r}")


def dist_cdf(kind: str, x: float, *, dof=None, lam=0.0, d1=None, d2=None,
             tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Cumulative distribution function; see :func:`dist_sf` for ``kind``."""
    if kind == "central_chi2":
        _check_dof(dof=dof)
        return 0.0 if x <= 0 else float(special.gammainc(0.5 * dof, 0.5 * x))
    if kind == "fisher":
        _check_dof(d1=d1, d2=d2)
        return 0.0 if x <= 0 else reg_inc_beta(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2))
    return 1.0 - dist_sf(kind, x, dof=dof, lam=lam, d1=d1, d2=d2, tol=tol)
