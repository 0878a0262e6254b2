"""scikit-learn style estimators wrapping selection and posterior sampling."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_in_domain
from .exceptions import InputError
from .kernel import HyperPrior
from .mcmc import SamplerConfig, run_chain
from .metrics import log_predictive
from .predict import predictive_on_domain_grid, predictive_on_grid
from .quadrature import Domain
from .selection import SelectionConfig, select_inducing_points


def _domain(lower, upper):
    if lower is None or upper is None:
        raise InputError("domain_lower and domain_upper are required")
    return Domain(lower, upper)


def _prior(h_max, l_max, dim):
    l_max = np.asarray(l_max, dtype=float)
    return HyperPrior(h_max, np.broadcast_to(l_max, (dim,)) if l_max.size == 1 else l_max)


class InducingPointSelector(BaseEstimator):
    """Greedy inducing point selection by expected variance reduction.

    Parameters
    ----------
    domain_lower, domain_upper : array-like
        Bounds of the rectangular domain.
    h_max, l_max : float
        Bounds of the output and length scale hyperpriors.
    n_theta : int
        Number of hyperparameter draws averaged in the utility.
    alpha : float
        Stop when the relative utility gain drops below ``alpha``.
    target_utility : float or None
        Keep the smallest prefix reaching this normalized utility; ``None``
        keeps every selected point.
    restarts, max_points : int
        Inner maximizer restarts and the cap on selected points.
    random_state : int or None
        Seed of the hyperparameter draws and the maximizer.

    Attributes
    ----------
    inducing_points_ : ndarray of shape (k, d)
    utilities_ : ndarray
        Utility after each selected point (full trace).
    normalized_utilities_ : ndarray
    w_inf_ : float
    trace_ : SelectionTrace
    """

    def __init__(self, domain_lower=None, domain_upper=None, h_max=10.0, l_max=25.0, n_theta=20,
                 alpha=1e-3, target_utility=0.95, restarts=8, max_points=256, random_state=None):
        self.domain_lower = domain_lower
        self.domain_upper = domain_upper
        self.h_max = h_max
        self.l_max = l_max
        self.n_theta = n_theta
        self.alpha = alpha
        self.target_utility = target_utility
        self.restarts = restarts
        self.max_points = max_points
        self.random_state = random_state

    def fit(self, X, y=None):
        domain = _domain(self.domain_lower, self.domain_upper)
        X = check_in_domain(X, domain, name="X")
        config = SelectionConfig(
            prior=_prior(self.h_max, self.l_max, domain.dim), alpha=self.alpha,
            n_theta=self.n_theta, restarts=self.restarts, max_points=self.max_points,
            seed=self.random_state,
        )
        trace = select_inducing_points(X, domain, config)
        k = trace.k
        if self.target_utility is not None:
            k = trace.k_for(self.target_utility) or trace.k
        self.trace_ = trace
        self.domain_ = domain
        self.inducing_points_ = trace.points[:k].copy()
        self.utilities_ = trace.utilities.copy()
        self.normalized_utilities_ = trace.normalized.copy()
        self.w_inf_ = trace.w_inf
        self.n_features_in_ = domain.dim
        return self


class PoissonGPIntensity(BaseEstimator):
    """Posterior intensity of a Poisson process under an inducing-point GP prior.

    ``fit(X)`` selects inducing points (unless ``inducing_points`` is given)
    and runs the block Gibbs sampler on the events ``X``.

    Parameters
    ----------
    domain_lower, domain_upper : array-like
        Bounds of the rectangular domain.
    inducing_points : array-like of shape (k, d) or None
        Fixed inducing points; selected from the data when ``None``.
    selection_h_max, selection_l_max : float
        Hyperprior bounds used to select inducing points.
    h_max, l_max : float
        Hyperprior bounds used for posterior sampling.
    target_utility : float
        Normalized utility the selected inducing set must reach.
    burn_in, n_samples, thinning : int
    quadrature_order : int
    random_state : int
    """

    def __init__(self, domain_lower=None, domain_upper=None, inducing_points=None,
                 selection_h_max=10.0, selection_l_max=25.0, h_max=0.25, l_max=25.0,
                 n_theta=20, alpha=1e-3, target_utility=0.95, burn_in=1000, n_samples=5000,
                 thinning=1, quadrature_order=20, random_state=0):
        self.domain_lower = domain_lower
        self.domain_upper = domain_upper
        self.inducing_points = inducing_points
        self.selection_h_max = selection_h_max
        self.selection_l_max = selection_l_max
        self.h_max = h_max
        self.l_max = l_max
        self.n_theta = n_theta
        self.alpha = alpha
        self.target_utility = target_utility
        self.burn_in = burn_in
        self.n_samples = n_samples
        self.thinning = thinning
        self.quadrature_order = quadrature_order
        self.random_state = random_state

    def fit(self, X, y=None):
        domain = _domain(self.domain_lower, self.domain_upper)
        X = check_in_domain(X, domain, name="X")
        if self.inducing_points is None:
            selector = InducingPointSelector(
                self.domain_lower, self.domain_upper, h_max=self.selection_h_max,
                l_max=self.selection_l_max, n_theta=self.n_theta, alpha=self.alpha,
                target_utility=self.target_utility, random_state=self.random_state,
            ).fit(X)
            self.selector_ = selector
            Z = selector.inducing_points_
        else:
            Z = check_in_domain(self.inducing_points, domain, name="inducing_points")
        config = SamplerConfig(burn_in=self.burn_in, n_samples=self.n_samples,
                               thinning=self.thinning, seed=self.random_state,
                               quadrature_order=self.quadrature_order)
        self.samples_ = run_chain(X, Z, domain, config, _prior(self.h_max, self.l_max, domain.dim))
        self.domain_ = domain
        self.inducing_points_ = np.asarray(Z, dtype=float).copy()
        self.n_features_in_ = domain.dim
        return self

    def predict_estimate(self, X):
        """Full :class:`~ppgp.predict.IntensityEstimate` at ``X``."""
        check_is_fitted(self, "samples_")
        return predictive_on_grid(self.samples_, X)

    def predict(self, X):
        """Posterior mean intensity at ``X``."""
        return self.predict_estimate(X).intensity_mean

    def predict_log(self, X):
        """Posterior mean and variance of the log-intensity at ``X``."""
        est = self.predict_estimate(X)
        return est.log_mean, est.log_var

    def score(self, X, y=None, n_per_dim=500):
        """Held-out log likelihood of the events ``X`` under the posterior mean intensity."""
        check_is_fitted(self, "samples_")
        estimate = predictive_on_domain_grid(self.samples_, n_per_dim if self.domain_.dim == 1
                                             else min(n_per_dim, 100))
        return log_predictive(estimate, [X], self.domain_)[0]
