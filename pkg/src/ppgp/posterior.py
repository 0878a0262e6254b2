"""Unnormalized log posterior of inducing log-intensities and hyperparameters.

With the data log-intensities integrated out analytically (Gaussian moment
generating function) and the integral of the intensity integrated out
under its moment-matched Gamma prior, the log posterior is

    log p(theta) + log N(G | 0, K(Z, Z))
        + sum_i m(s_i) + 1/2 sum_i v(s_i) - alpha_I log(1 + beta_I)

where ``v(s_i) = h^2 - [K(D, Z) K(Z, Z)^-1 K(Z, D)]_ii``.

Everything that depends on ``theta`` only is computed once per ``theta``
and kept in a :class:`ThetaCache`. Each evaluation for a new ``G`` then
costs ``O(k^2 + P^2)`` for ``P`` quadrature nodes, independent of ``n``.
"""

import logging

import numpy as np
from scipy import linalg

from ._validation import check_in_domain
from .exceptions import InputError
from .gp_conditional import (
    GPValues,
    InducingFactor,
    InducingSet,
    clamp_variance,
    conditional_mean,
    trace_reduction,
)
from .kernel import gram, log_hyper_prior_density
from .quadrature import gamma_moments, gauss_legendre_rule, moment_match

logger = logging.getLogger(__name__)

DATA_CHUNK = 65536


class ThetaCache:
    """Quantities of the log posterior that depend on ``theta`` only."""

    def __init__(self, ctx, params, keep_data_block=True):
        self.params = params
        self.factor = InducingFactor(ctx.inducing, params)
        k = ctx.inducing.k
        n = ctx.n
        h2 = params.variance

        # data block, chunked so temporaries stay O(k * chunk)
        self.a_sum = np.zeros(k)
        self.trace_reduction = 0.0
        self.data_var = np.empty(n)
        self.data_block = np.empty((k, n)) if keep_data_block else None
        for start in range(0, n, DATA_CHUNK):
            stop = min(start + DATA_CHUNK, n)
            A = self.factor.whiten(ctx.data[start:stop])
            sq = np.einsum("ij,ij->j", A, A)
            self.a_sum += A.sum(axis=1)
            self.trace_reduction += float(sq.sum())
            self.data_var[start:stop] = h2 - sq
            if self.data_block is not None:
                self.data_block[:, start:stop] = A
        self.data_var = clamp_variance(self.data_var, h2)
        self.trace_cond = n * h2 - self.trace_reduction

        nodes = ctx.rule.nodes
        self.node_block = self.factor.whiten(nodes)
        node_cov = gram(nodes, nodes, params) - self.node_block.T @ self.node_block
        node_cov = 0.5 * (node_cov + node_cov.T)
        self.node_var = clamp_variance(np.diag(node_cov).copy(), h2)
        np.fill_diagonal(node_cov, self.node_var)
        self.node_cov_expm1 = np.expm1(node_cov)

    def mean_at_data(self, nu, m_star):
        """Conditional means at the data points for whitened values ``nu``."""
        if self.data_block is None:
            raise InputError("cache was built without the data block")
        return m_star + self.data_block.T @ nu


class PosteriorContext:
    """Data, inducing points, quadrature rule and hyperprior of one chain.

    The most recently requested :class:`ThetaCache` is kept; asking for a
    different ``theta`` rebuilds it.
    """

    def __init__(self, data, inducing, domain, prior, quadrature_order=20, m_star=None,
                 keep_data_block=True):
        if not isinstance(inducing, InducingSet):
            inducing = InducingSet(inducing)
        self.domain = domain
        self.data = check_in_domain(data, domain, name="data")
        if inducing.k and inducing.dim != domain.dim:
            raise InputError("inducing points and domain have different dimensions")
        if prior.dim != domain.dim:
            raise InputError("hyperprior and domain have different dimensions")
        self.inducing = inducing
        self.prior = prior
        self.rule = gauss_legendre_rule(quadrature_order, domain)
        if m_star is None:
            if self.n == 0:
                raise InputError("m_star must be given explicitly when there is no data")
            m_star = np.log(self.n / domain.volume)
        self.m_star = float(m_star)
        self.keep_data_block = keep_data_block
        self._cache = None

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def k(self):
        return self.inducing.k

    def build_cache(self, params):
        """Fresh :class:`ThetaCache` for ``params``; not remembered."""
        return ThetaCache(self, params, keep_data_block=self.keep_data_block)

    def theta_cache(self, params):
        """Cache for ``params``, reusing the last one when ``theta`` is unchanged."""
        cache = self._cache
        if cache is None or cache.params != params:
            cache = self._cache = self.build_cache(params)
        return cache

    def invalidate(self):
        self._cache = None

    def integral_moments(self, nu, cache):
        node_mean = self.m_star + cache.node_block.T @ nu
        return moment_match(self.rule.weights, node_mean, cache.node_var, cache.node_cov_expm1)

    def log_likelihood(self, nu, cache, integral_term=True):
        """Collapsed log likelihood as a function of whitened values ``nu``."""
        value = self.n * self.m_star + float(cache.a_sum @ nu) + 0.5 * cache.trace_cond
        if integral_term:
            value += self.integral_moments(nu, cache).log_mgf_at_minus_one()
        return value

    def mean_sum_gradient(self, params):
        """Gradient of ``sum_i m(s_i)`` with respect to ``G``."""
        cache = self.theta_cache(params)
        return linalg.solve_triangular(cache.factor.chol, cache.a_sum, lower=True, trans="T")

    def log_likelihood_direct(self, values, params, integral_term=True):
        """Same quantity as :func:`log_likelihood_term` without any caching."""
        value = 0.0
        if self.n:
            value += float(np.sum(conditional_mean(self.data, self.inducing, values, params)))
            red = trace_reduction(self.data, self.inducing, params) if self.k else 0.0
            value += 0.5 * (self.n * params.variance - red)
        if integral_term:
            gm = gamma_moments(self.inducing, values, params, self.rule)
            value += gm.log_mgf_at_minus_one()
        return value


def _whiten(values, cache):
    return cache.factor.whiten_values(values.centered)


def log_likelihood_term(values, params, ctx, integral_term=True):
    """``sum m(s_i) + 1/2 Tr(Sigma_DD) - alpha_I log(1 + beta_I)``.

    ``integral_term=False`` drops the Gamma factor.
    """
    cache = ctx.theta_cache(params)
    return ctx.log_likelihood(_whiten(values, cache), cache, integral_term=integral_term)


def log_posterior(values, params, ctx):
    """Unnormalized log posterior; ``-inf`` outside the hyperprior support."""
    lp = log_hyper_prior_density(params, ctx.prior)
    if not np.isfinite(lp):
        return -np.inf
    cache = ctx.theta_cache(params)
    nu = _whiten(values, cache)
    logdet = 2.0 * np.sum(np.log(np.diag(cache.factor.chol)))
    log_gauss = -0.5 * float(nu @ nu) - 0.5 * logdet - 0.5 * ctx.k * np.log(2 * np.pi)
    return lp + log_gauss + ctx.log_likelihood(nu, cache)


def make_values(G, ctx):
    """Wrap centered inducing values for ``ctx``."""
    return GPValues.from_centered(G, ctx.m_star)
