"""Bayesian intensity estimation for Poisson point processes.

The log-intensity has a Gaussian process prior conditioned on its values at
a few greedily selected inducing points. Posterior sampling costs
``O(n k^2)`` per sweep for ``n`` events and ``k`` inducing points.
"""

from .estimator import InducingPointSelector, PoissonGPIntensity
from .exceptions import (
    ConditioningError,
    DataError,
    InputError,
    NumericalError,
    PPGPError,
    RangeError,
    SamplerError,
    SelectionError,
)
from .gp_conditional import (
    GPValues,
    InducingSet,
    conditional_cov_diag,
    conditional_cov_full,
    conditional_mean,
    trace_reduction,
)
from .kernel import HyperParams, HyperPrior, gram, kernel_eval, log_hyper_prior_density, sample_hyper
from .mcmc import PosteriorSamples, SamplerConfig, effective_sample_size, run_chain
from .metrics import EvalReport, log_predictive, normalized_errors
from .posterior import PosteriorContext, log_likelihood_term, log_posterior
from .predict import IntensityEstimate, predictive_at_data, predictive_on_grid
from .quadrature import Domain, GammaMoments, gamma_moments, gauss_legendre_rule
from .selection import SelectionConfig, SelectionTrace, select_inducing_points, utility
from .simulate import IntensitySpec, integral_of, simulate, synthetic_bimodal

__version__ = "0.1.0"

__all__ = [
    "ConditioningError", "DataError", "Domain", "EvalReport", "GPValues", "GammaMoments",
    "HyperParams", "HyperPrior", "InducingPointSelector", "InducingSet", "InputError",
    "IntensityEstimate", "IntensitySpec", "NumericalError", "PPGPError", "PoissonGPIntensity",
    "PosteriorContext", "PosteriorSamples", "RangeError", "SamplerConfig", "SamplerError",
    "SelectionConfig", "SelectionError", "SelectionTrace", "conditional_cov_diag",
    "conditional_cov_full", "conditional_mean", "effective_sample_size", "gamma_moments",
    "gauss_legendre_rule", "gram", "integral_of", "kernel_eval", "log_hyper_prior_density",
    "log_likelihood_term", "log_posterior", "log_predictive", "normalized_errors",
    "predictive_at_data", "predictive_on_grid", "run_chain", "sample_hyper",
    "select_inducing_points", "simulate", "synthetic_bimodal", "trace_reduction", "utility",
]
