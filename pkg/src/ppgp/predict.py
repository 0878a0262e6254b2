"""Posterior predictive summaries of the log-intensity and the intensity.

At a data point ``s_i`` and for a fixed draw of the inducing values, the
log-intensity is Gaussian with mean ``M_i + v_i`` and variance ``v_i``: the
conditional prior ``N(M_i, v_i)`` tilted by the likelihood factor
``lambda(s_i)``. Away from the data there is no such factor and the law is
the conditional prior itself. Draws are combined with the laws of total
expectation and total variance.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_in_domain
from .exceptions import InputError
from .gp_conditional import InducingFactor


@dataclass
class IntensityEstimate:
    """Posterior summaries at a set of locations."""

    locations: np.ndarray
    log_mean: np.ndarray
    log_var: np.ndarray
    intensity_mean: np.ndarray
    axes: list | None = None

    @property
    def log_sd(self):
        return np.sqrt(self.log_var)

    @property
    def lower_band(self):
        """Intensity at one posterior SD below the log mean."""
        return np.exp(self.log_mean - self.log_sd)

    @property
    def upper_band(self):
        return np.exp(self.log_mean + self.log_sd)

    def __len__(self):
        return self.log_mean.size


def predictive_at_data(samples, data=None):
    """Posterior summaries at the data points the chain was fitted on."""
    summary = samples.data_summary
    if summary is None or summary.count == 0:
        raise InputError("samples carry no draws at the data points")
    if data is not None and len(data) != summary.n:
        raise InputError(f"samples were fitted on {summary.n} points, got {len(data)}")
    locations = None if data is None else np.asarray(data, dtype=float).reshape(summary.n, -1)
    return IntensityEstimate(
        locations=locations,
        log_mean=summary.mean_tilted.copy(),
        log_var=summary.mean_var + summary.between_var,
        intensity_mean=summary.mean_intensity.copy(),
    )


def predictive_on_grid(samples, grid, axes=None):
    """Posterior summaries at arbitrary points of the domain.

    Each draw contributes the conditional mean ``m(s)`` and variance
    ``v(s)``; the intensity mean per draw is ``exp(m + v/2)``.
    """
    if samples.n_draws == 0:
        raise InputError("no posterior draws")
    X = check_in_domain(grid, samples.domain, name="grid")
    n = X.shape[0]
    mean = np.zeros(n)
    m2 = np.zeros(n)
    mean_var = np.zeros(n)
    mean_int = np.zeros(n)
    factor = None
    A = None
    for i in range(samples.n_draws):
        params = samples.params(i)
        if factor is None or factor.params != params:
            factor = InducingFactor(samples.inducing, params)
            A = factor.whiten(X)
            var = factor.variance_from_whitened(A)
        nu = factor.whiten_values(samples.log_lambda[i] - samples.m_star)
        m = samples.m_star + A.T @ nu
        c = i + 1
        delta = m - mean
        mean += delta / c
        m2 += delta * (m - mean)
        mean_var += (var - mean_var) / c
        mean_int += (np.exp(m + 0.5 * var) - mean_int) / c
    return IntensityEstimate(
        locations=X,
        log_mean=mean,
        log_var=mean_var + m2 / samples.n_draws,
        intensity_mean=mean_int,
        axes=axes,
    )


def predictive_on_domain_grid(samples, n_per_dim):
    """:func:`predictive_on_grid` on a regular grid spanning the domain."""
    X, axes = samples.domain.grid(n_per_dim)
    return predictive_on_grid(samples, X, axes=axes)
