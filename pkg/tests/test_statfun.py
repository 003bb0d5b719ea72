import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irsdetect import statfun as sf
from irsdetect.errors import ConvergenceError, DomainError

from oracles import beta_oracle, bisect, gamma_upper_oracle, marcum_oracle, q_oracle


def rel_err(got, ref):
    return abs(got - ref) / abs(ref)


# -- q_function / inv_q ------------------------------------------------------

def test_q_examples():
    assert sf.q_function(0.0) == 0.5
    assert sf.q_function(math.inf) == 0.0
    assert sf.q_function(40.0) == 0.0
    assert sf.q_function(-math.inf) == 1.0
    assert rel_err(sf.q_function(1.0), q_oracle(1.0)) < 1e-12
    assert sf.q_function(1.0) == pytest.approx(0.15865525, abs=1e-8)


def test_q_rejects_nan():
    with pytest.raises(DomainError):
        sf.q_function(float("nan"))


@pytest.mark.parametrize("x", np.logspace(-3, np.log10(30.0), 12))
def test_q_matches_quadrature(x):
    assert rel_err(sf.q_function(x), q_oracle(x)) < 1e-8


def test_q_is_monotone_and_vectorized():
    grid = np.linspace(-45, 45, 2001)
    vals = sf.q_function(grid)
    assert vals.shape == grid.shape
    assert np.all(np.diff(vals) <= 0)
    assert np.all((vals >= 0) & (vals <= 1))


def test_inv_q_examples():
    assert sf.inv_q(0.5) == 0.0
    assert sf.inv_q(sf.q_function(2.0)) == pytest.approx(2.0, rel=1e-10)
    ref = bisect(lambda t: q_oracle(t), 0.15865525, 0, 5)
    assert sf.inv_q(0.15865525) == pytest.approx(1.0, abs=1e-6)
    assert sf.inv_q(0.15865525) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_inv_q_domain(p):
    with pytest.raises(DomainError):
        sf.inv_q(p)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-300, max_value=1 - 1e-12))
def test_inv_q_round_trip(p):
    x = sf.inv_q(p)
    assert sf.q_function(x) == pytest.approx(p, rel=1e-10)


# -- incomplete gamma --------------------------------------------------------

def test_gamma_examples():
    assert sf.gamma_upper_reg(2, 0.0) == 1.0
    assert sf.gamma_upper_reg(1, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert rel_err(sf.gamma_upper_reg(1, 1.0), gamma_upper_oracle(1, 1.0)) < 1e-12
    assert sf.gamma_upper_reg(1, math.exp(-1), invert=True) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("a", [0.0, -1.0])
def test_gamma_domain_a(a):
    with pytest.raises(DomainError):
        sf.gamma_upper_reg(a, 1.0)


@pytest.mark.parametrize("p", [0.0, 1.2, -0.5])
def test_gamma_inverse_domain(p):
    with pytest.raises(DomainError):
        sf.gamma_upper_reg(2.0, p, invert=True)


def test_gamma_negative_x():
    with pytest.raises(DomainError):
        sf.gamma_upper_reg(2.0, -1.0)


@settings(max_examples=150, deadline=None)
@given(st.floats(min_value=0.2, max_value=60.0), st.floats(min_value=1e-250, max_value=1.0))
def test_gamma_round_trip(a, p):
    x = sf.gamma_upper_reg(a, p, invert=True)
    assert sf.gamma_upper_reg(a, x) == pytest.approx(p, rel=1e-10)


@pytest.mark.parametrize("a", [0.5, 1.0, 4.0, 16.0])
def test_gamma_monotone(a):
    vals = sf.gamma_upper_reg(a, np.linspace(0, 80, 500))
    assert np.all(np.diff(vals) <= 0)


# -- incomplete beta ---------------------------------------------------------

def test_beta_examples():
    assert sf.reg_inc_beta(3, 5, 0.0) == 0.0
    assert sf.reg_inc_beta(3, 5, 1.0) == 1.0
    assert sf.reg_inc_beta(1, 2, 1 / 3) == pytest.approx(5 / 9, rel=1e-14)


@pytest.mark.parametrize("args", [(0, 1, 0.5), (1, -1, 0.5), (1, 1, 1.5), (1, 1, -0.1)])
def test_beta_domain(args):
    with pytest.raises(DomainError):
        sf.reg_inc_beta(*args)


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (2.0, 7.0), (4.0, 12.0)])
def test_beta_monotone_and_complement(a, b):
    x = np.linspace(0, 1, 301)
    lower = sf.reg_inc_beta(a, b, x)
    upper = sf.reg_inc_beta_complement(a, b, x)
    assert np.all(np.diff(lower) >= 0)
    assert np.allclose(lower + upper, 1.0, atol=1e-14)


# -- Marcum-Q ----------------------------------------------------------------

def test_marcum_examples():
    assert sf.marcum_q(3, 1.7, 0.0) == 1.0
    assert sf.marcum_q(1, 0.0, 2.0) == pytest.approx(math.exp(-2), rel=1e-12)
    assert sf.marcum_q(1, 1.0, 1.0) == pytest.approx(0.73287, abs=1e-5)
    assert rel_err(sf.marcum_q(1, 1.0, 1.0), marcum_oracle(1, 1.0, 1.0)) < 1e-10


@pytest.mark.parametrize("order", [1, 2, 5])
@pytest.mark.parametrize("b", [0.1, 1.0, 3.0, 7.5])
def test_marcum_zero_a_is_gamma_tail(order, b):
    assert sf.marcum_q(order, 0.0, b) == pytest.approx(sf.gamma_upper_reg(order, b * b / 2),
                                                       rel=1e-10)


@pytest.mark.parametrize("order,a,b", [(1, 2.0, 3.0), (2, 5.0, 4.0), (4, 0.5, 6.0),
                                       (3, 10.0, 12.0), (8, 30.0, 25.0)])
def test_marcum_matches_integral(order, a, b):
    assert rel_err(sf.marcum_q(order, a, b), marcum_oracle(order, a, b)) < 1e-8


def test_marcum_monotone():
    bs = np.linspace(0, 12, 120)
    vals = [sf.marcum_q(3, 2.0, b) for b in bs]
    assert np.all(np.diff(vals) <= 1e-15)
    avals = [sf.marcum_q(3, a, 4.0) for a in np.linspace(0, 8, 60)]
    assert np.all(np.diff(avals) >= -1e-15)


def test_marcum_convergence_error_carries_partial():
    tol = sf.Tolerance(max_terms=5)
    with pytest.raises(ConvergenceError) as info:
        sf.marcum_q(2, 40.0, 40.0, tol)
    assert info.value.partial is not None


@pytest.mark.parametrize("args", [(0, 1.0, 1.0), (1.5, 1.0, 1.0), (1, -1.0, 1.0), (1, 1.0, -1.0)])
def test_marcum_domain(args):
    with pytest.raises(DomainError):
        sf.marcum_q(*args)


def test_tolerance_validation():
    with pytest.raises(DomainError):
        sf.Tolerance(abs_tol=0)
    with pytest.raises(DomainError):
        sf.Tolerance(max_terms=0)


# -- distribution CDFs -------------------------------------------------------

def test_dist_examples():
    assert sf.dist_cdf("central_chi2", 2.0, dof=2) == pytest.approx(1 - math.exp(-1), rel=1e-14)
    assert sf.dist_cdf("fisher", 1.0, d1=2, d2=4) == pytest.approx(5 / 9, rel=1e-14)


@pytest.mark.parametrize("dof", [2, 4, 8])
def test_noncentral_zero_lambda_is_central(dof):
    for x in np.linspace(0.1, 40, 25):
        assert sf.dist_cdf("noncentral_chi2", x, dof=dof, lam=0.0) == pytest.approx(
            sf.dist_cdf("central_chi2", x, dof=dof), rel=1e-10)


@pytest.mark.parametrize("dof", [3, 5])
def test_noncentral_odd_dof_against_mpmath_series(dof):
    import mpmath as mp

    lam, x = 3.0, 6.0
    # Poisson mixture of central lower-incomplete gamma terms
    ref = float(mp.nsum(lambda k: mp.exp(-lam / 2) * (lam / 2) ** k / mp.factorial(k)
                        * mp.gammainc(dof / 2 + k, 0, x / 2, regularized=True), [0, mp.inf]))
    assert sf.dist_cdf("noncentral_chi2", x, dof=dof, lam=lam) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("kind,params", [
    ("central_chi2", {"dof": 6}),
    ("noncentral_chi2", {"dof": 6, "lam": 4.0}),
    ("fisher", {"d1": 8, "d2": 26}),
])
def test_cdfs_monotone_and_bounded(kind, params):
    grid = np.linspace(0, 60, 200)
    vals = np.array([sf.dist_cdf(kind, x, **params) for x in grid])
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(np.diff(vals) >= -1e-14)


@pytest.mark.parametrize("kind,params", [
    ("central_chi2", {"dof": 0}),
    ("noncentral_chi2", {"dof": 2, "lam": -1.0}),
    ("fisher", {"d1": 0, "d2": 3}),
    ("poisson", {}),
])
def test_dist_domain(kind, params):
    with pytest.raises(DomainError):
        sf.dist_cdf(kind, 1.0, **params)


def test_noncentral_beta_reduces_to_central():
    for x in (0.1, 0.5, 0.9):
        assert sf.noncentral_beta_sf(3, 7, 0.0, x) == pytest.approx(
            sf.reg_inc_beta_complement(3, 7, x), rel=1e-13)
