import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drfgp.exceptions import NumericalDegeneracyError, ShapeError
from drfgp.gauss_info import (
    InfoState,
    LocalStats,
    Predictive,
    apply_fused_stats,
    local_stats,
    log_predictive_density,
    posterior_moments,
    predict,
    predict_batch,
)
from drfgp.rff import KernelSpec, feature_map, features, sample_frequencies

PRIOR_VAR, OBS_VAR = 1.0, 1e-2


@pytest.fixture
def basis():
    return sample_frequencies(KernelSpec([0.7, 1.3]), 3, seed=4)


@pytest.fixture
def data():
    rng = np.random.default_rng(9)
    X = rng.uniform(-2, 2, (5, 2))
    y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=5)
    return X, y


def direct_posterior(basis, X, y, prior_var=PRIOR_VAR, obs_var=OBS_VAR):
    """Batch posterior with an explicit inverse, the textbook route."""
    Phi = features(basis, X).T  # (2J, n)
    cov = np.linalg.inv(Phi @ Phi.T / obs_var + np.eye(Phi.shape[0]) / prior_var)
    mean = cov @ Phi @ y / obs_var
    return mean, cov


def test_prior_state():
    s = InfoState.prior(6, prior_var=2.0, obs_var=0.5)
    np.testing.assert_array_equal(s.precision, np.eye(6) / 2.0)
    np.testing.assert_array_equal(s.info_vec, np.zeros(6))
    with pytest.raises(ValueError):
        s.precision[0, 0] = 3.0


def test_local_stats_empty_batch(basis):
    st_ = local_stats(basis, np.empty((0, 2)), np.empty(0), OBS_VAR)
    np.testing.assert_array_equal(st_.P, np.zeros((6, 6)))
    np.testing.assert_array_equal(st_.s, np.zeros(6))


def test_local_stats_single_zero_target(basis):
    x = np.array([0.4, -0.2])
    st_ = local_stats(basis, x[None], [0.0], OBS_VAR)
    phi = feature_map(basis, x)
    np.testing.assert_array_equal(st_.s, np.zeros(6))
    np.testing.assert_allclose(st_.P, np.outer(phi, phi) / OBS_VAR, rtol=1e-14)


def test_local_stats_additive(basis, data):
    X, y = data
    batch = local_stats(basis, X[:3], y[:3], OBS_VAR)
    total = LocalStats.zeros(6)
    for i in range(3):
        total = total + local_stats(basis, X[i:i + 1], y[i:i + 1], OBS_VAR)
    np.testing.assert_allclose(batch.P, total.P, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(batch.s, total.s, rtol=1e-12, atol=1e-12)


def test_local_stats_length_mismatch(basis, data):
    X, y = data
    with pytest.raises(ShapeError):
        local_stats(basis, X, y[:3], OBS_VAR)


def test_apply_zero_stats_is_identity(basis):
    s = InfoState.prior(6, PRIOR_VAR, OBS_VAR)
    out = apply_fused_stats(s, np.zeros((6, 6)), np.zeros(6))
    np.testing.assert_array_equal(out.precision, s.precision)
    np.testing.assert_array_equal(out.info_vec, s.info_vec)


def test_sequential_updates_equal_summed_update(basis, data):
    X, y = data
    s_seq = InfoState.prior(6, PRIOR_VAR, OBS_VAR)
    for i in range(len(y)):
        st_ = local_stats(basis, X[i:i + 1], y[i:i + 1], OBS_VAR)
        s_seq = apply_fused_stats(s_seq, st_.P, st_.s)
    # direct summation oracle: prior precision plus sum of outer products
    Phi = features(basis, X)
    D = np.eye(6) / PRIOR_VAR + sum(np.outer(p, p) for p in Phi) / OBS_VAR
    eta = sum(p * t for p, t in zip(Phi, y)) / OBS_VAR
    np.testing.assert_allclose(s_seq.precision, D, rtol=1e-12)
    np.testing.assert_allclose(s_seq.info_vec, eta, rtol=1e-12)


def test_apply_enforces_symmetry(basis):
    s = InfoState.prior(6, PRIOR_VAR, OBS_VAR)
    rng = np.random.default_rng(0)
    A = rng.normal(size=(6, 6))
    P = A @ A.T
    P[0, 1] += 1e-9
    out = apply_fused_stats(s, P, np.zeros(6))
    assert np.array_equal(out.precision, out.precision.T)


def test_apply_rejects_indefinite(basis):
    s = InfoState.prior(6, PRIOR_VAR, OBS_VAR)
    with pytest.raises(NumericalDegeneracyError):
        apply_fused_stats(s, -10 * np.eye(6), np.zeros(6))


def test_apply_shape_mismatch():
    s = InfoState.prior(6, PRIOR_VAR, OBS_VAR)
    with pytest.raises(ShapeError):
        apply_fused_stats(s, np.zeros((4, 4)), np.zeros(4))


def test_fresh_moments_are_prior():
    mean, cov = posterior_moments(InfoState.prior(4, 3.0, OBS_VAR))
    np.testing.assert_array_equal(mean, np.zeros(4))
    np.testing.assert_allclose(cov, 3.0 * np.eye(4), rtol=1e-15)


def test_moments_match_direct_posterior(basis, data):
    X, y = data
    st_ = local_stats(basis, X, y, OBS_VAR)
    s = apply_fused_stats(InfoState.prior(6, PRIOR_VAR, OBS_VAR), st_.P, st_.s)
    mean, cov = posterior_moments(s)
    m_ref, c_ref = direct_posterior(basis, X, y)
    np.testing.assert_allclose(mean, m_ref, rtol=1e-10, atol=1e-10 * np.abs(m_ref).max())
    np.testing.assert_allclose(cov, c_ref, rtol=1e-10, atol=1e-10 * np.abs(c_ref).max())
    assert np.array_equal(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() >= 0


def test_prior_predictive(basis):
    s = InfoState.prior(6, PRIOR_VAR, OBS_VAR)
    p = predict(s, basis, np.array([1.5, -0.3]))
    assert p.mean == 0.0
    assert p.variance == pytest.approx(PRIOR_VAR + OBS_VAR, rel=1e-12)


def test_predict_matches_explicit_moments(basis, data):
    X, y = data
    st_ = local_stats(basis, X, y, OBS_VAR)
    s = apply_fused_stats(InfoState.prior(6, PRIOR_VAR, OBS_VAR), st_.P, st_.s)
    m_ref, c_ref = direct_posterior(basis, X, y)
    for x in np.random.default_rng(3).uniform(-2, 2, (8, 2)):
        phi = feature_map(basis, x)
        p = predict(s, basis, x)
        assert p.mean == pytest.approx(phi @ m_ref, abs=1e-10)
        assert p.variance == pytest.approx(phi @ c_ref @ phi + OBS_VAR, abs=1e-10)
        assert p.variance >= OBS_VAR


def test_predict_batch_agrees_with_predict(basis, data):
    X, y = data
    st_ = local_stats(basis, X, y, OBS_VAR)
    s = apply_fused_stats(InfoState.prior(6, PRIOR_VAR, OBS_VAR), st_.P, st_.s)
    means, vars_ = predict_batch(s, basis, X)
    for i in range(len(y)):
        p = predict(s, basis, X[i])
        assert means[i] == pytest.approx(p.mean, rel=1e-13)
        assert vars_[i] == pytest.approx(p.variance, rel=1e-13)


def test_log_predictive_density_values():
    assert log_predictive_density(0.3, Predictive(0.3, 1 / (2 * np.pi))) == pytest.approx(0.0, abs=1e-15)
    assert log_predictive_density(1.0, Predictive(0.0, 1.0)) == pytest.approx(
        -0.5 * np.log(2 * np.pi) - 0.5, rel=1e-15
    )
    assert log_predictive_density(1.0, Predictive(0.0, 1.0)) == pytest.approx(-1.418939, abs=1e-6)
    p = Predictive(2.0, 0.7)
    assert log_predictive_density(2.5, p) == log_predictive_density(1.5, p)


# ---- fusion properties -------------------------------------------------------


def test_fusion_of_half_prior_subposteriors_equals_full_posterior(basis, data):
    X, y = data
    full_prior = np.eye(6) / PRIOR_VAR
    parts = []
    for Xi, yi in ((X[:2], y[:2]), (X[2:], y[2:])):
        st_ = local_stats(basis, Xi, yi, OBS_VAR)
        parts.append((full_prior / 2 + st_.P, st_.s))
    # product of Gaussians: precisions add, information vectors add
    D = parts[0][0] + parts[1][0]
    eta = parts[0][1] + parts[1][1]
    m_ref, c_ref = direct_posterior(basis, X, y)
    fused = InfoState(D, eta, PRIOR_VAR, OBS_VAR)
    mean, cov = posterior_moments(fused)
    np.testing.assert_allclose(mean, m_ref, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(cov, c_ref, rtol=1e-10, atol=1e-12)


def test_sum_of_subposterior_precisions_equals_centralized(basis, data):
    X, y = data
    N = 3
    chunks = np.array_split(np.arange(len(y)), N)
    D_sum = sum(
        np.eye(6) / (N * PRIOR_VAR) + local_stats(basis, X[c], y[c], OBS_VAR).P
        for c in chunks
    )
    Phi = features(basis, X)
    D_c = Phi.T @ Phi / OBS_VAR + np.eye(6) / PRIOR_VAR
    np.testing.assert_allclose(D_sum, D_c, rtol=1e-13, atol=1e-13)


def test_order_invariance(basis, data):
    X, y = data
    rng = np.random.default_rng(0)
    ref = None
    for _ in range(4):
        perm = rng.permutation(len(y))
        s = InfoState.prior(6, PRIOR_VAR, OBS_VAR)
        for i in perm:
            st_ = local_stats(basis, X[i:i + 1], y[i:i + 1], OBS_VAR)
            s = apply_fused_stats(s, st_.P, st_.s)
        if ref is None:
            ref = s
        scale = np.abs(ref.precision).max()
        np.testing.assert_allclose(s.precision, ref.precision, atol=1e-12 * scale)
        np.testing.assert_allclose(s.info_vec, ref.info_vec, atol=1e-12 * np.abs(ref.info_vec).max())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_predictive_variance_never_increases(seed):
    rng = np.random.default_rng(seed)
    basis = sample_frequencies(KernelSpec([1.0]), 4, seed=seed)
    s = InfoState.prior(8, PRIOR_VAR, OBS_VAR)
    probe = rng.uniform(-3, 3, (5, 1))
    _, before = predict_batch(s, basis, probe)
    for _ in range(5):
        X = rng.uniform(-3, 3, (rng.integers(0, 4), 1))
        st_ = local_stats(basis, X, rng.normal(size=len(X)), OBS_VAR)
        s = apply_fused_stats(s, st_.P, st_.s)
        _, after = predict_batch(s, basis, probe)
        assert np.all(after <= before * (1 + 1e-10))
        before = after
