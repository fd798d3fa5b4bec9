import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lapshrink.model import (
    DegenerateGroupError,
    GroupedSample,
    GroupMoments,
    NotPositiveDefiniteError,
    ZeroVarianceError,
    correlation_from_covariance,
    group_moments,
    negative_correlation_loglik,
    negative_loglik_gradient,
    scale_to_precision,
)

from conftest import random_moments, random_spd


def test_group_moments_two_points():
    s = GroupedSample(np.array([[1.0, 2.0], [3.0, 4.0]]), [1, 1], 1)
    m = group_moments(s)
    np.testing.assert_allclose(m.means[0], [2, 3])
    # divisor n_k: deviations (+-1, +-1)
    np.testing.assert_allclose(m.covariances[0], [[1, 1], [1, 1]])
    np.testing.assert_allclose(m.correlations[0], [[1, 1], [1, 1]])
    assert m.weights.tolist() == [1.0]


def test_constant_column_is_rejected():
    X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    with pytest.raises(ZeroVarianceError):
        group_moments(GroupedSample(X, [1, 1, 1], 1))


def test_degenerate_group():
    X = np.arange(8.0).reshape(4, 2) ** 2
    with pytest.raises(DegenerateGroupError):
        group_moments(GroupedSample(X, [1, 1, 1, 2], 2))


def test_labels_out_of_range():
    with pytest.raises(ValueError):
        GroupedSample(np.ones((3, 2)), [1, 2, 3], 2)


def test_missing_values_rejected():
    X = np.array([[1.0, np.nan], [2.0, 1.0]])
    with pytest.raises(ValueError):
        GroupedSample(X, [1, 1], 1)


def test_weights_sum_to_one():
    m = random_moments(0, p=4, sizes=(5, 7, 11))
    assert m.weights.sum() == pytest.approx(1.0)
    assert m.n == 23
    for R in m.correlations:
        np.testing.assert_allclose(np.diag(R), 1.0)
        assert np.all(np.abs(R) <= 1.0)


@pytest.mark.parametrize(
    "cov, expected",
    [
        ([[4.0, 2.0], [2.0, 9.0]], [[1.0, 1 / 3], [1 / 3, 1.0]]),
        (np.eye(3), np.eye(3)),
        (np.diag([2.0, 7.0]), np.eye(2)),
    ],
)
def test_correlation_from_covariance(cov, expected):
    np.testing.assert_allclose(correlation_from_covariance(np.array(cov)), expected, atol=1e-15)


def test_correlation_requires_positive_diagonal():
    with pytest.raises(ZeroVarianceError):
        correlation_from_covariance(np.array([[0.0, 0.0], [0.0, 1.0]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_correlation_idempotent(seed, p):
    S = random_spd(np.random.default_rng(seed), p)
    R = correlation_from_covariance(S)
    np.testing.assert_allclose(correlation_from_covariance(R), R, atol=1e-12)


def test_scale_to_precision_examples():
    om = scale_to_precision(np.eye(3)[None], np.full((1, 3), 4.0))
    np.testing.assert_allclose(om[0], 0.25 * np.eye(3))
    T = np.array([[[2.0, 0.0], [0.0, 3.0]]])
    np.testing.assert_array_equal(scale_to_precision(T, np.ones((1, 2))), T)
    assert scale_to_precision(T, np.array([[2.0, 5.0]]))[0, 0, 1] == 0.0
    with pytest.raises(ZeroVarianceError):
        scale_to_precision(T, np.array([[0.0, 1.0]]))


@pytest.mark.parametrize("seed", range(5))
def test_back_transform_recovers_inverse_covariance(seed):
    S = random_spd(np.random.default_rng(seed), 5)
    R = correlation_from_covariance(S)
    theta = np.linalg.inv(R)
    omega = scale_to_precision(theta, np.diag(S))
    np.testing.assert_allclose(omega, np.linalg.inv(S), atol=1e-8)


def _moments_1d(psi=1.0, counts=(1.0,)):
    K = len(counts)
    return GroupMoments.from_correlations(np.full((K, 1, 1), psi), counts)


def test_loglik_examples():
    m = _moments_1d()
    assert negative_correlation_loglik(np.ones((1, 1, 1)), m) == pytest.approx(1.0)
    assert negative_correlation_loglik(np.full((1, 1, 1), 2.0), m) == pytest.approx(2 - np.log(2))
    p = 4
    mI = GroupMoments.from_correlations(np.stack([np.eye(p)] * 3), [3, 5, 9])
    assert negative_correlation_loglik(np.stack([np.eye(p)] * 3), mI) == pytest.approx(p)


def test_loglik_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        negative_correlation_loglik(-np.ones((1, 1, 1)), _moments_1d())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.99))
def test_loglik_convex(seed, t):
    rng = np.random.default_rng(seed)
    m = random_moments(seed % 1000, p=4, sizes=(8, 9))
    T1 = np.stack([random_spd(rng, 4) for _ in range(2)])
    T2 = np.stack([random_spd(rng, 4) for _ in range(2)])
    f = lambda T: negative_correlation_loglik(T, m)
    assert f(t * T1 + (1 - t) * T2) <= t * f(T1) + (1 - t) * f(T2) + 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    m = random_moments(seed, p=4, sizes=(10, 14))
    T = np.stack([random_spd(rng, 4, cond=4) for _ in range(2)])
    G = negative_loglik_gradient(T, m)
    h = 1e-5
    for k in range(2):
        for i in range(4):
            for j in range(i, 4):
                E = np.zeros_like(T)
                E[k, i, j] = E[k, j, i] = h
                fd = (negative_correlation_loglik(T + E, m) - negative_correlation_loglik(T - E, m)) / (2 * h)
                # a symmetric bump moves both (i,j) and (j,i)
                analytic = G[k, i, j] + (G[k, j, i] if i != j else 0.0)
                assert abs(fd - analytic) <= 1e-4 * max(abs(analytic), 1e-3)
