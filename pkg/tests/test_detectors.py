import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irsdetect import detectors as det
from irsdetect import kernels
from irsdetect.channel import Hypothesis, complex_normal
from irsdetect.detectors import DetectorKind as D
from irsdetect.detectors import KnownSideInfo
from irsdetect.errors import DomainError, RankDeficiencyError, UndefinedStatisticError


def rng(seed=0):
    return np.random.default_rng(seed)


def _case(M=3, L=8, seed=0):
    r = rng(seed)
    u = complex_normal(r, M)
    A = complex_normal(r, (M, M))
    cov = A @ A.conj().T + M * np.eye(M)
    X = np.outer(u, np.ones(L)) + np.linalg.cholesky(cov) @ complex_normal(r, (M, L))
    return X, np.outer(u, np.ones(L)), cov


# reference forms written directly from the definitions with dense algebra
def rao_ref(X):
    y = X.sum(axis=1)
    return 2 * np.real(y.conj() @ np.linalg.solve(X @ X.conj().T, y))


def glrt_ref(X):
    L = X.shape[1]
    W = X @ X.conj().T
    y = X.sum(axis=1)
    return -L * (np.linalg.slogdet(W - np.outer(y, y.conj()) / L)[1] - np.linalg.slogdet(W)[1])


def test_t_opt_definition():
    X, Mm, cov = _case()
    ref = 2 * np.real(np.trace(Mm.conj().T @ np.linalg.inv(cov) @ X))
    assert det.t_opt(X, Mm, cov) == pytest.approx(ref, rel=1e-12)


def test_t1_family_definitions():
    X, Mm, _ = _case()
    e = np.real(np.trace(X.conj().T @ X))
    c = np.real(np.trace(Mm.conj().T @ X))
    mm = np.real(np.trace(Mm.conj().T @ Mm))
    assert det.t1(X, Mm) == pytest.approx((2 * c - mm) / e, rel=1e-12)
    assert det.t1_low_snr(X, Mm) == pytest.approx(c / e, rel=1e-12)
    assert det.t1_large_l(X, Mm) == pytest.approx(c / X.shape[1], rel=1e-12)


def test_t2_definition():
    X, _, cov = _case()
    one = np.ones(X.shape[1])
    ref = np.real(one @ X.conj().T @ np.linalg.inv(cov) @ X @ one)
    assert det.t2(X, cov) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("M, L", [(1, 2), (2, 3), (4, 16), (6, 40)])
def test_blind_stats_match_dense_forms(M, L):
    X, _, _ = _case(M, L, seed=M * L)
    assert det.t3_rao(X) == pytest.approx(rao_ref(X), rel=1e-10)
    assert det.t3_glrt_log(X) == pytest.approx(glrt_ref(X), rel=1e-9)


@given(st.integers(1, 6), st.integers(1, 30), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_rao_bounds_and_glrt_relation(M, extra, seed):
    L = M + extra
    X = complex_normal(rng(seed), (M, L))
    rao, glrt = det.t3_rao(X), det.t3_glrt_log(X)
    assert 0.0 <= rao <= 2 * L * (1 + 1e-12)
    assert glrt >= 0.0
    if rao < 2 * L * (1 - 1e-6):
        assert glrt == pytest.approx(-L * np.log1p(-rao / (2 * L)), rel=1e-8)


@given(st.integers(0, 2**32 - 1), st.floats(1e-6, 1e6))
@settings(max_examples=40, deadline=None)
def test_blind_stats_invariant_to_left_transform(seed, scale):
    r = rng(seed)
    X = complex_normal(r, (3, 10))
    A = scale * (complex_normal(r, (3, 3)) + 2 * np.eye(3))
    assert det.t3_rao(A @ X) == pytest.approx(det.t3_rao(X), rel=1e-7)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_t1_at_most_one(seed):
    r = rng(seed)
    X = complex_normal(r, (3, 6)) * r.uniform(0.01, 10)
    Mm = np.outer(complex_normal(r, 3), np.ones(6)) * r.uniform(0.01, 10)
    assert det.t1(X, Mm) <= 1.0 + 1e-12


def test_glrt_zero_iff_row_sums_vanish():
    X = complex_normal(rng(1), (3, 9))
    X[:, -1] = -X[:, :-1].sum(axis=1)
    assert det.t3_glrt_log(X) == 0.0
    assert det.t3_rao(X) == pytest.approx(0.0, abs=1e-12)


def test_coherent_scalar_data_is_infinite_glrt():
    X = np.full((1, 6), 2.0 - 1.0j)
    assert det.t3_rao(X) == pytest.approx(12.0)
    assert det.t3_glrt_log(X) == np.inf


@pytest.mark.parametrize("M, L", [(3, 3), (4, 2)])
def test_blind_needs_more_snapshots_than_antennas(M, L):
    X = complex_normal(rng(0), (M, L))
    with pytest.raises(DomainError):
        det.t3_rao(X)
    with pytest.raises(DomainError):
        det.evaluate(D.T3Glrt, X[None], KnownSideInfo())


def test_singular_gram_matrix():
    X = complex_normal(rng(0), (3, 8))
    X[2] = X[1]
    with pytest.raises(RankDeficiencyError):
        det.t3_glrt_log(X)
    with pytest.raises(RankDeficiencyError):
        det.evaluate(D.T3Rao, X[None], KnownSideInfo())


@pytest.mark.parametrize("row, expected", [([1, -1], 0.0), ([1, 1j], 2 * np.log(2)),
                                           ([1, 1], np.inf)])
def test_glrt_hand_values(row, expected):
    assert det.t3_glrt_log(np.array([row], complex)) == pytest.approx(expected, rel=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_rao_unitary_rotation(seed):
    r = rng(seed)
    X = complex_normal(r, (4, 9))
    U = np.linalg.qr(complex_normal(r, (4, 4)))[0]
    assert det.t3_rao(U @ X) == pytest.approx(det.t3_rao(X), rel=1e-9)


def test_zero_data_undefined_for_t1():
    Z = np.zeros((2, 4), complex)
    Mm = np.ones((2, 4), complex)
    with pytest.raises(UndefinedStatisticError):
        det.t1(Z, Mm)
    with pytest.raises(UndefinedStatisticError):
        det.t1_low_snr(Z, Mm)
    with pytest.raises(UndefinedStatisticError):
        det.evaluate(D.T1, Z[None], KnownSideInfo(Mmat=Mm))


def test_singular_noise_covariance():
    X, Mm, _ = _case(2, 4)
    with pytest.raises(RankDeficiencyError):
        det.t_opt(X, Mm, np.array([[1, 1], [1, 1]], complex))


@pytest.mark.parametrize("kind", list(D))
def test_batched_matches_scalar(kind):
    X, Mm, cov = _case(3, 8, seed=4)
    stack = np.stack([X, 0.5 * X, X.conj()])
    side = KnownSideInfo(Mmat=Mm, noise_cov=cov)
    scalar = {
        D.Opt: lambda Y: det.t_opt(Y, Mm, cov),
        D.T1: lambda Y: det.t1(Y, Mm),
        D.T1LowSnr: lambda Y: det.t1_low_snr(Y, Mm),
        D.T1LargeL: lambda Y: det.t1_large_l(Y, Mm),
        D.T2: lambda Y: det.t2(Y, cov),
        D.T3Glrt: det.t3_glrt_log,
        D.T3Rao: det.t3_rao,
    }[kind]
    np.testing.assert_allclose(det.evaluate(kind, stack, side), [scalar(Y) for Y in stack],
                               rtol=1e-10)


def test_batched_general_mean_matrix():
    r = rng(9)
    X = complex_normal(r, (5, 2, 4))
    Mm = complex_normal(r, (2, 4))  # not of the form u 1^T
    side = KnownSideInfo(Mmat=Mm, noise_cov=np.eye(2))
    np.testing.assert_allclose(det.evaluate(D.T1, X, side), [det.t1(Y, Mm) for Y in X])
    np.testing.assert_allclose(det.evaluate(D.Opt, X, side),
                               [det.t_opt(Y, Mm, np.eye(2)) for Y in X])


@pytest.mark.parametrize("kind, side", [(D.Opt, KnownSideInfo(noise_cov=np.eye(2))),
                                        (D.T2, KnownSideInfo()),
                                        (D.T1, KnownSideInfo(noise_cov=np.eye(2)))])
def test_missing_side_information(kind, side):
    with pytest.raises(DomainError):
        side.check(kind)


def test_for_detector_strips_knowledge():
    full = KnownSideInfo(Mmat=np.ones((2, 3)), noise_cov=np.eye(2), s=np.ones(1), H=np.ones((2, 1)))
    blind = full.for_detector(D.T3Rao)
    assert blind.Mmat is None and blind.noise_cov is None and blind.H is None
    t1 = full.for_detector(D.T1)
    assert t1.Mmat is not None and t1.noise_cov is None
    t2 = full.for_detector(D.T2)
    assert t2.Mmat is None and t2.noise_cov is not None and t2.H is not None


def test_evaluate_rejects_flat_input():
    with pytest.raises(DomainError):
        det.evaluate(D.T3Rao, np.ones((2, 3)), KnownSideInfo())


# ---------------------------------------------------------------- backends

@pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled core not built")
@pytest.mark.parametrize("M, L", [(1, 2), (2, 5), (4, 16), (8, 9), (8, 64)])
def test_backends_agree(M, L):
    X = complex_normal(rng(M + L), (200, M, L)) * np.exp(rng(1).uniform(-20, 20, (200, 1, 1)))
    X[0, :, -1] = -X[0, :, :-1].sum(axis=1)
    out = {}
    for name in ("cython", "numpy"):
        prev = kernels.use_backend(name)
        try:
            out[name] = kernels.blind_stats(X) + kernels.row_sum_energy(X)
        finally:
            kernels.use_backend(prev)
    for a, b in zip(out["cython"], out["numpy"]):
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("name", sorted(kernels.BACKENDS))
def test_backend_rank_deficiency_flag(name):
    prev = kernels.use_backend(name)
    try:
        rao, glrt = kernels.blind_stats(np.ones((2, 3, 3), complex))
    finally:
        kernels.use_backend(prev)
    assert np.all(np.isnan(rao)) and np.all(np.isnan(glrt))


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


# ---------------------------------------------------------------- estimators

def test_pinv_matches_numpy():
    A = complex_normal(rng(0), (4, 3)) @ complex_normal(rng(1), (3, 5))  # rank 3
    np.testing.assert_allclose(det.pinv(A), np.linalg.pinv(A), atol=1e-10)
    np.testing.assert_array_equal(det.pinv(np.zeros((2, 3))), np.zeros((3, 2)))


def test_mle_g_recovers_single_device_gain():
    r = rng(2)
    G = complex_normal(r, (3, 1))
    s = np.array([0.6 - 0.8j])
    X = np.outer(G @ s, np.ones(7))
    np.testing.assert_allclose(det.mle_g(X, s), G, rtol=1e-12)


def test_mle_g_rejects_zero_signal():
    with pytest.raises(DomainError):
        det.mle_g(np.ones((2, 3)), np.zeros(2))


def test_mle_power_full_rank_and_fallback(caplog):
    r = rng(3)
    H = complex_normal(r, (4, 1))
    s = np.array([1.0 + 0j])
    X = np.outer(H[:, 0] * np.sqrt(20.0), np.ones(5))
    np.testing.assert_allclose(det.mle_power(X, H, s), [[np.sqrt(20.0)]], rtol=1e-12)
    Hd = np.hstack([H, H])  # rank 1 < 2 columns
    with caplog.at_level(logging.INFO, logger="irsdetect.detectors"):
        out = det.mle_power(X, Hd, np.array([1.0, 0.0j]))
    assert "Moore-Penrose" in caplog.text
    np.testing.assert_allclose(Hd @ out @ np.array([1.0, 0]), H[:, 0] * np.sqrt(20.0), rtol=1e-10)


def test_mle_noise_forms():
    X, Mm, _ = _case(3, 50)
    S0 = det.mle_noise(X)
    np.testing.assert_allclose(S0, X @ X.conj().T / 50)
    S1 = det.mle_noise(X, Mm, Hypothesis.H1)
    R = X - Mm
    np.testing.assert_allclose(S1, R @ R.conj().T / 50)
    assert det.mle_noise(X, Mm, "H1", white=True) == pytest.approx(np.trace(S1).real / 3)
