import time

import numpy as np
import pytest
from scipy import stats

from conftest import FlatContext
from oracles import toy_grid_posterior_mean, toy_problem
from ppgp.exceptions import InputError, SamplerError
from ppgp.gp_conditional import InducingSet
from ppgp.kernel import HyperParams, HyperPrior, gram, sample_hyper
from ppgp.mcmc import (
    DataSummary,
    PosteriorSamples,
    SamplerConfig,
    effective_sample_size,
    ess_step,
    init_state,
    mh_hyper_step,
    run_chain,
)
from ppgp.posterior import PosteriorContext
from ppgp.quadrature import Domain

DOMAIN = Domain([0.0], [10.0])
PRIOR = HyperPrior(2.0, [5.0])


def flat_ctx(k=2):
    Z = InducingSet(np.linspace(2.0, 8.0, k)[:, None])
    return FlatContext(np.array([[1.0], [4.0], [6.0]]), Z, DOMAIN, PRIOR, quadrature_order=5)


def test_flat_likelihood_accepts_everything():
    ctx = flat_ctx()
    rng = np.random.default_rng(0)
    state = init_state(ctx)
    for _ in range(10000):
        state = mh_hyper_step(state, ctx, rng)
    assert state.mh_accepted == state.mh_proposed == 10000


def test_same_theta_always_accepted():
    ctx = PosteriorContext(np.array([[1.0], [4.0]]), InducingSet([[3.0]]), DOMAIN, PRIOR)
    rng = np.random.default_rng(1)
    state = init_state(ctx)
    for _ in range(50):
        state = mh_hyper_step(state, ctx, rng, proposal=state.params)
    assert state.mh_accepted == 50


def test_flat_theta_marginal_is_prior():
    ctx = flat_ctx()
    rng = np.random.default_rng(2)
    state = init_state(ctx)
    h = []
    for _ in range(10000):
        state = mh_hyper_step(state, ctx, rng)
        h.append(state.params.output_scale)
    ref = [t.output_scale for t in sample_hyper(PRIOR, np.random.default_rng(3), size=10000)]
    assert stats.ks_2samp(h, ref).statistic < 0.02


def test_flat_slice_sampler_recovers_prior():
    ctx = flat_ctx(k=3)
    rng = np.random.default_rng(4)
    state = init_state(ctx, params=HyperParams(1.2, [3.0]))
    draws = []
    for _ in range(20000):
        state = ess_step(state, ctx, rng)
        draws.append(state.G)
    draws = np.array(draws)
    K = gram(ctx.inducing.locations, ctx.inducing.locations, state.params)
    for j in range(3):
        sd = np.sqrt(K[j, j])
        ess = effective_sample_size(draws[:, j])
        assert abs(draws[:, j].mean()) <= 3 * sd / np.sqrt(ess)
        assert draws[:, j].var() == pytest.approx(K[j, j], rel=0.10)


def test_slice_step_clears_threshold():
    ctx = PosteriorContext(np.array([[1.0], [4.0], [4.5]]), InducingSet([[3.0], [6.0]]), DOMAIN,
                           PRIOR)
    rng = np.random.default_rng(5)
    state = init_state(ctx)
    for _ in range(200):
        before = state.loglik
        state = ess_step(state, ctx, rng)
        assert np.isfinite(state.loglik)
        assert state.loglik == pytest.approx(ctx.log_likelihood(state.nu, state.cache), rel=1e-10)
    assert before != state.loglik


class BrokenContext(PosteriorContext):
    def log_likelihood(self, nu, cache, integral_term=True):
        return 0.0 if not np.any(nu) else -np.inf


def test_slice_sampler_gives_up():
    ctx = BrokenContext(np.array([[1.0]]), InducingSet([[3.0]]), DOMAIN, PRIOR)
    state = init_state(ctx)
    with pytest.raises(SamplerError):
        ess_step(state, ctx, np.random.default_rng(0))


def test_sampler_error_carries_partial_draws():
    class FailLater(PosteriorContext):
        calls = 0

        def log_likelihood(self, nu, cache, integral_term=True):
            FailLater.calls += 1
            return 0.0 if FailLater.calls < 40 or not np.any(nu) else -np.inf

    ctx = FailLater(np.array([[1.0]]), InducingSet([[3.0]]), DOMAIN, PRIOR)
    config = SamplerConfig(burn_in=2, n_samples=100, seed=0, update_hyper=False)
    with pytest.raises(SamplerError) as info:
        run_chain(ctx.data, ctx.inducing, DOMAIN, config, PRIOR, ctx=ctx)
    partial = info.value.partial
    assert partial is not None and 0 < partial.n_draws < 100
    assert "error" in partial.extra


def test_toy_posterior_matches_grid():
    domain, data, Z, params, prior = toy_problem()
    config = SamplerConfig(burn_in=500, n_samples=20000, seed=7, update_hyper=False)
    samples = run_chain(data, Z, domain, config, prior, init_params=params)
    expected = toy_grid_posterior_mean()
    assert samples.log_lambda[:, 0].mean() == pytest.approx(expected, rel=0.02)


def _small_run(seed=3, **kw):
    rng = np.random.default_rng(0)
    data = rng.uniform(0, 10, size=(15, 1))
    config = SamplerConfig(burn_in=20, n_samples=60, seed=seed, quadrature_order=10, **kw)
    return run_chain(data, InducingSet([[2.0], [5.0], [8.0]]), DOMAIN, config, PRIOR)


def test_run_chain_deterministic():
    a, b = _small_run(), _small_run()
    np.testing.assert_array_equal(a.log_lambda, b.log_lambda)
    np.testing.assert_array_equal(a.output_scale, b.output_scale)
    np.testing.assert_array_equal(a.data_summary.mean_tilted, b.data_summary.mean_tilted)


def test_run_chain_shapes_and_thinning():
    s = _small_run(thinning=3)
    assert s.n_draws == 60 and s.log_lambda.shape == (60, 3)
    assert s.n_iterations == 20 + 60 * 3
    assert np.all(np.isfinite(s.loglik)) and np.all(np.isfinite(s.log_lambda))
    assert s.data_summary.count == 60
    assert 0 <= s.acceptance_rate <= 1


def test_run_chain_needs_inducing_points():
    with pytest.raises(InputError):
        run_chain(np.array([[1.0]]), InducingSet(np.empty((0, 1))), DOMAIN, SamplerConfig(),
                  PRIOR)


def test_config_validation():
    with pytest.raises(InputError):
        SamplerConfig(n_samples=0)
    with pytest.raises(InputError):
        SamplerConfig(thinning=0)


def test_pooling_matches_concatenation():
    a, b = _small_run(seed=1), _small_run(seed=2)
    pooled = PosteriorSamples.pool([a, b])
    assert pooled.n_draws == a.n_draws + b.n_draws
    np.testing.assert_array_equal(pooled.log_lambda, np.vstack([a.log_lambda, b.log_lambda]))
    mean = (a.data_summary.mean_tilted + b.data_summary.mean_tilted) / 2
    np.testing.assert_allclose(pooled.data_summary.mean_tilted, mean, rtol=1e-12)


def test_pooled_summary_equals_single_pass(rng):
    t = rng.normal(size=(40, 3))
    v = rng.uniform(0, 1, size=(40, 3))
    from ppgp.mcmc import _pool_summaries
    pooled = _pool_summaries([DataSummary.from_draws(t[:15], v[:15]),
                              DataSummary.from_draws(t[15:], v[15:])])
    whole = DataSummary.from_draws(t, v)
    np.testing.assert_allclose(pooled.m2_tilted, whole.m2_tilted, rtol=1e-12)
    np.testing.assert_allclose(pooled.mean_intensity, whole.mean_intensity, rtol=1e-12)


def test_data_summary_welford(rng):
    t = rng.normal(size=(30, 4))
    v = rng.uniform(0, 1, size=(30, 4))
    s = DataSummary.from_draws(t, v)
    np.testing.assert_allclose(s.mean_tilted, t.mean(axis=0))
    np.testing.assert_allclose(s.between_var, t.var(axis=0))
    np.testing.assert_allclose(s.mean_var, v.mean(axis=0))
    np.testing.assert_allclose(s.mean_intensity, np.exp(t + v / 2).mean(axis=0))
    back = DataSummary.from_dict(s.to_dict())
    np.testing.assert_array_equal(back.m2_tilted, s.m2_tilted)


def test_ess_iid(rng):
    x = rng.standard_normal(10000)
    assert 0.8 <= effective_sample_size(x) / x.size <= 1.2


def test_ess_ar1(rng):
    n, phi = 100000, 0.9
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    expected = (1 - phi) / (1 + phi)
    assert effective_sample_size(x) / n == pytest.approx(expected, rel=0.3)


def test_ess_constant():
    assert effective_sample_size(np.full(50, 3.0)) == 1.0


def test_ess_needs_ten_values():
    with pytest.raises(InputError):
        effective_sample_size(np.arange(5.0))


def test_chain_never_visits_minus_inf():
    s = _small_run()
    assert np.all(np.isfinite(s.loglik))


@pytest.mark.slow
def test_iteration_cost_linear_in_n():
    Z = InducingSet(np.linspace(5, 45, 8)[:, None])
    domain = Domain([0.0], [50.0])
    prior = HyperPrior(0.25, [25.0])

    def per_iteration(n):
        data = np.random.default_rng(n).uniform(0, 50, size=(n, 1))
        config = SamplerConfig(burn_in=0, n_samples=15, seed=0)
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            run_chain(data, Z, domain, config, prior)
            best = min(best, time.perf_counter() - t0)
        return best

    ratio = per_iteration(200000) / per_iteration(100000)
    assert 1.6 <= ratio <= 2.6
