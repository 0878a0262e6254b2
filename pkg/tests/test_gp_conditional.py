import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppgp.exceptions import InputError
from ppgp.gp_conditional import (
    GPValues,
    InducingSet,
    clamp_variance,
    conditional_cov_diag,
    conditional_cov_full,
    conditional_mean,
    trace_reduction,
)
from ppgp.exceptions import ConditioningError
from ppgp.kernel import HyperParams, gram


def dense_conditional(query, Z, G, m_star, p):
    """Textbook conditional moments with a dense solve."""
    Kzz = gram(Z, Z, p)
    Kqz = gram(query, Z, p)
    mean = m_star + Kqz @ np.linalg.solve(Kzz, G)
    cov = gram(query, query, p) - Kqz @ np.linalg.solve(Kzz, Kqz.T)
    return mean, cov


def test_empty_set_returns_prior_mean():
    values = GPValues(np.empty(0), 1.5)
    out = conditional_mean(np.linspace(0, 1, 4), InducingSet(np.empty((0, 1))), values,
                           HyperParams(1.0, [1.0]))
    np.testing.assert_array_equal(out, 1.5)


def test_interpolates_at_inducing_point():
    Z = InducingSet([[0.3]])
    p = HyperParams(1.0, [0.5])
    out = conditional_mean([[0.3]], Z, GPValues([0.7], 0.2), p)
    assert out[0] == pytest.approx(0.7, abs=1e-6)


def test_two_point_mean_matches_linear_solve():
    # frozen from a dense 2x2 solve
    p = HyperParams(1.0, [1.0])
    out = conditional_mean([[0.5]], InducingSet([[0.0], [1.0]]), GPValues([0.3, -0.2], 0.0), p)
    assert out[0] == pytest.approx(0.05493184317705153, rel=1e-6)
    var = conditional_cov_diag([[0.5]], InducingSet([[0.0], [1.0]]), p)
    assert var[0] == pytest.approx(0.030456370859785475, rel=1e-5)


def test_empty_set_variance_is_prior():
    var = conditional_cov_diag(np.linspace(0, 1, 5), InducingSet(np.empty((0, 1))),
                               HyperParams(1.7, [1.0]))
    np.testing.assert_allclose(var, 1.7 ** 2)


def test_variance_vanishes_at_inducing_point():
    p = HyperParams(2.0, [1.0])
    var = conditional_cov_diag([[0.4]], InducingSet([[0.4], [2.0]]), p)
    assert var[0] <= 1e-6 * p.variance


def test_full_cov_empty_set_is_gram():
    X = np.linspace(0, 1, 4)[:, None]
    p = HyperParams(1.0, [0.3])
    np.testing.assert_allclose(conditional_cov_full(X, InducingSet(np.empty((0, 1))), p),
                               gram(X, X, p))


def test_full_cov_diag_consistency(rng):
    Z = InducingSet(rng.uniform(0, 5, size=(3, 1)))
    p = HyperParams(1.3, [1.1])
    X = rng.uniform(0, 5, size=(6, 1))
    full = conditional_cov_full(X, Z, p)
    np.testing.assert_allclose(np.diag(full), conditional_cov_diag(X, Z, p), atol=1e-12)
    one = conditional_cov_full(X[:1], Z, p)
    assert one[0, 0] == pytest.approx(conditional_cov_diag(X[:1], Z, p)[0], abs=1e-12)


def test_full_cov_psd(rng):
    Z = InducingSet([[0.2], [0.8]])
    p = HyperParams(1.0, [0.4])
    C = conditional_cov_full(rng.uniform(0, 1, size=(5, 1)), Z, p)
    np.testing.assert_allclose(C, C.T)
    assert np.linalg.eigvalsh(C).min() >= -1e-8


def test_matches_dense_oracle(rng):
    Z = rng.uniform(0, 4, size=(3, 2))
    X = rng.uniform(0, 4, size=(7, 2))
    p = HyperParams(0.9, [1.2, 0.8])
    G = rng.normal(size=3)
    mean, cov = dense_conditional(X, Z, G, 0.4, p)
    np.testing.assert_allclose(conditional_mean(X, InducingSet(Z), GPValues(G + 0.4, 0.4), p),
                               mean, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(conditional_cov_diag(X, InducingSet(Z), p), np.diag(cov),
                               atol=1e-6)


def test_trace_reduction_single_point():
    p = HyperParams(1.5, [1.0])
    assert trace_reduction([[0.2]], InducingSet([[0.2]]), p) == pytest.approx(2.25, rel=1e-6)


def test_trace_reduction_dense(rng):
    D = rng.uniform(0, 3, size=(6, 1))
    Z = rng.uniform(0, 3, size=(2, 1))
    p = HyperParams(1.1, [0.9])
    _, cov = dense_conditional(D, Z, np.zeros(2), 0.0, p)
    expected = np.trace(gram(D, D, p)) - np.trace(cov)
    assert trace_reduction(D, InducingSet(Z), p) == pytest.approx(expected, rel=1e-8)


def test_trace_reduction_chunking_is_exact(rng):
    D = rng.uniform(0, 3, size=(1000, 1))
    Z = InducingSet(rng.uniform(0, 3, size=(4, 1)))
    p = HyperParams(1.0, [0.5])
    a = trace_reduction(D, Z, p)
    b = trace_reduction(D, Z, p, chunk_size=37)
    assert a == pytest.approx(b, rel=1e-12)


def test_trace_reduction_needs_points():
    with pytest.raises(InputError):
        trace_reduction([[0.0]], InducingSet(np.empty((0, 1))), HyperParams(1.0, [1.0]))


def test_trace_reduction_linear_time(rng):
    Z = InducingSet(rng.uniform(0, 1, size=(5, 1)))
    p = HyperParams(1.0, [0.3])

    def best(n):
        D = rng.uniform(0, 1, size=(n, 1))
        times = []
        for _ in range(7):
            t0 = time.perf_counter()
            trace_reduction(D, Z, p)
            times.append(time.perf_counter() - t0)
        return min(times)

    ratio = best(400000) / best(200000)
    assert 1.6 <= ratio <= 2.6


def test_duplicates_rejected():
    with pytest.raises(InputError):
        InducingSet([[1.0], [1.0]])


def test_clamp_variance():
    np.testing.assert_array_equal(clamp_variance(np.array([-1e-10, 0.5]), 1.0), [0.0, 0.5])
    with pytest.raises(ConditioningError):
        clamp_variance(np.array([-1e-3]), 1.0)


points = st.lists(st.floats(0, 10), min_size=1, max_size=6, unique=True)


@settings(max_examples=100, deadline=None)
@given(points, st.lists(st.floats(0, 10), min_size=1, max_size=8), st.floats(0.2, 3),
       st.floats(0.3, 5))
def test_variance_reduction(zs, xs, h, l):
    p = HyperParams(h, [l])
    var = conditional_cov_diag(np.array(xs)[:, None], InducingSet(np.array(zs)[:, None]), p)
    assert np.all(var >= 0) and np.all(var <= h * h * (1 + 1e-12))


@settings(max_examples=60, deadline=None)
@given(points, st.floats(0, 10), st.lists(st.floats(0, 10), min_size=1, max_size=8),
       st.floats(0.3, 5))
def test_more_points_never_increase_variance(zs, extra, xs, l):
    if extra in zs:
        return
    p = HyperParams(1.0, [l])
    X = np.array(xs)[:, None]
    before = conditional_cov_diag(X, InducingSet(np.array(zs)[:, None]), p)
    after = conditional_cov_diag(X, InducingSet(np.array(zs + [extra])[:, None]), p)
    assert np.all(after <= before + 1e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 50), st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_trace_reduction_dense_property(n, k, seed):
    r = np.random.default_rng(seed)
    D = r.uniform(0, 10, size=(n, 1))
    Z = np.unique(r.uniform(0, 10, size=(k, 1)), axis=0)
    p = HyperParams(1.0, [r.uniform(0.5, 4)])
    Kzz = gram(Z, Z, p)
    if np.linalg.cond(Kzz) > 1e6:
        return
    Kdz = gram(D, Z, p)
    # the factorization always carries the starting jitter of 1e-8 h^2
    Kj = Kzz + 1e-8 * p.variance * np.eye(len(Z))
    expected = np.trace(Kdz @ np.linalg.solve(Kj, Kdz.T))
    assert trace_reduction(D, InducingSet(Z), p) == pytest.approx(expected, rel=1e-8, abs=1e-10)


def test_deterministic(rng):
    Z = InducingSet(rng.uniform(0, 1, size=(3, 1)))
    X = rng.uniform(0, 1, size=(10, 1))
    p = HyperParams(1.0, [0.4])
    v = GPValues([0.1, 0.2, 0.3], 0.0)
    np.testing.assert_array_equal(conditional_mean(X, Z, v, p), conditional_mean(X, Z, v, p))
