import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ppgp.exceptions import ConditioningError, InputError
from ppgp.kernel import (
    HyperParams,
    HyperPrior,
    gram,
    hyper_from_latent,
    jittered_cholesky,
    kernel_eval,
    log_hyper_prior_density,
    sample_hyper,
)

finite = st.floats(-50, 50, allow_nan=False)
scales = st.floats(0.05, 20.0)


def test_zero_distance_gives_output_variance():
    assert kernel_eval([1.3], [1.3], HyperParams(2.0, [1.0])) == pytest.approx(4.0)


def test_one_length_scale_apart():
    assert kernel_eval([0.0], [0.7], HyperParams(1.0, [0.7])) == pytest.approx(np.exp(-0.5))


def test_small_gram_is_psd():
    K = gram([[0.0], [0.5], [1.0]], [[0.0], [0.5], [1.0]], HyperParams(1.0, [0.7]))
    assert np.linalg.eigvalsh(K).min() >= -1e-9


def test_gram_of_single_point():
    K = gram([[2.0]], [[2.0]], HyperParams(1.5, [3.0]))
    assert K.shape == (1, 1) and K[0, 0] == pytest.approx(2.25)


def test_gram_transpose(rng):
    X, Y = rng.normal(size=(4, 2)), rng.normal(size=(3, 2))
    p = HyperParams(1.2, [0.5, 2.0])
    np.testing.assert_array_equal(gram(X, Y, p), gram(Y, X, p).T)


def test_jittered_cholesky_on_fifty_points(rng):
    X = rng.uniform(0, 1, size=(50, 1))
    p = HyperParams(1.0, [0.8])
    L, jitter = jittered_cholesky(gram(X, X, p), p.variance)
    assert jitter >= 1e-8 and np.all(np.isfinite(L))


def test_jitter_escalation_and_failure():
    X = np.zeros((3, 1))
    p = HyperParams(1.0, [1.0])
    L, jitter = jittered_cholesky(gram(X, X, p), p.variance)
    assert 1e-8 <= jitter <= 1e-4
    with pytest.raises(ConditioningError):
        jittered_cholesky(-np.eye(3), 1.0)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        gram(np.zeros((2, 2)), np.zeros((2, 3)), HyperParams(1.0, [1.0, 1.0]))
    with pytest.raises(InputError):
        kernel_eval([0.0, 1.0], [0.0, 1.0], HyperParams(1.0, [1.0]))


def test_latent_zero_gives_half_the_bound():
    prior = HyperPrior(10.0, [25.0])
    p = hyper_from_latent(np.zeros(2), prior)
    assert p.output_scale == 5.0 and p.length_scales[0] == 12.5


def test_latent_limit_approaches_bound():
    prior = HyperPrior(10.0, [25.0])
    p = hyper_from_latent(np.full(2, 40.0), prior)
    assert p.output_scale == pytest.approx(10.0) and p.length_scales[0] == pytest.approx(25.0)


def test_sample_median(rng):
    prior = HyperPrior(4.0, [8.0])
    draws = sample_hyper(prior, rng, size=100000)
    h = np.array([d.output_scale for d in draws])
    assert abs(np.median(h) - 2.0) < 0.02 * 2.0


def test_density_at_half_bound():
    prior = HyperPrior(4.0, [8.0])
    lp = log_hyper_prior_density(HyperParams(2.0, [4.0]), prior)
    expected = 2 * stats.norm.logpdf(0.0) - np.log(4.0 / 4) - np.log(8.0 / 4)
    assert lp == pytest.approx(expected)


def test_density_integrates_to_one():
    prior = HyperPrior(3.0, [1.0])
    # length scale held at its mode; subtract its log density to get the h marginal
    l_part = stats.norm.logpdf(0.0) - np.log(1.0 / 4)
    grid = np.linspace(0, 3.0, 10002)[1:-1]
    dens = [np.exp(log_hyper_prior_density(HyperParams(h, [0.5]), prior) - l_part) for h in grid]
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)


def test_density_outside_support():
    prior = HyperPrior(1.0, [1.0])
    assert log_hyper_prior_density(HyperParams(1.0, [0.5]), prior) == -np.inf
    assert log_hyper_prior_density(HyperParams(0.5, [2.0]), prior) == -np.inf
    assert log_hyper_prior_density(HyperParams(1.0 - 1e-12, [0.5]), prior) < -20


@given(finite, finite, scales, scales)
def test_symmetric_and_bounded(a, b, h, l):
    p = HyperParams(h, [l])
    v = kernel_eval([a], [b], p)
    assert v == kernel_eval([b], [a], p)
    assert 0 <= v <= h * h * (1 + 1e-12)


@given(finite, st.floats(0, 10), st.floats(0, 10), scales)
def test_monotone_decay(a, r1, r2, l):
    p = HyperParams(1.0, [l])
    near, far = sorted([r1, r2])
    assert kernel_eval([a], [a + near], p) >= kernel_eval([a], [a + far], p)


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=20, unique=True), scales)
def test_gram_psd(xs, l):
    X = np.array(xs)[:, None]
    p = HyperParams(1.0, [l])
    K = gram(X, X, p)
    assert np.linalg.eigvalsh(K).min() >= -1e-8
    L, jitter = jittered_cholesky(K, p.variance)
    assert np.linalg.eigvalsh(K + jitter * np.eye(len(xs))).min() > 0 or np.all(np.diag(L) > 0)


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_samples_strictly_inside(x0, x1):
    prior = HyperPrior(2.0, [3.0])
    p = hyper_from_latent(np.array([x0, x1]), prior)
    assert 0 < p.output_scale < 2.0
    assert 0 < p.length_scales[0] < 3.0
