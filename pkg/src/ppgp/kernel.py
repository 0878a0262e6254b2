"""Squared exponential covariance, its hyperparameters and their priors.

The kernel is

    k(s1, s2) = h**2 * exp(-sum_j (s1_j - s2_j)**2 / (2 * l_j**2))

with output scale ``h`` and one length scale ``l_j`` per input dimension.
Each hyperparameter has a scaled sigmoid Gaussian prior,
``theta = theta_max / (1 + exp(-x))`` with ``x ~ N(0, 1)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import expit, logit

from ._validation import check_points
from .exceptions import ConditioningError, InputError

JITTER_START = 1e-8
JITTER_MAX = 1e-4

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class HyperParams:
    """Output scale ``h`` and per-dimension length scales ``l``."""

    output_scale: float
    length_scales: np.ndarray

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float)).copy()
        ls.setflags(write=False)
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "output_scale", float(self.output_scale))
        if not (np.isfinite(self.output_scale) and self.output_scale > 0):
            raise InputError(f"output_scale must be positive, got {self.output_scale}")
        if ls.ndim != 1 or ls.size == 0 or not np.all(np.isfinite(ls) & (ls > 0)):
            raise InputError(f"length_scales must be positive, got {ls}")

    @property
    def dim(self):
        return self.length_scales.size

    @property
    def variance(self):
        return self.output_scale ** 2

    def as_vector(self):
        """``[h, l_1, ..., l_d]``."""
        return np.concatenate([[self.output_scale], self.length_scales])

    @classmethod
    def from_vector(cls, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(theta[0], theta[1:])

    def key(self):
        return (self.output_scale, self.length_scales.tobytes())

    def __eq__(self, other):
        if not isinstance(other, HyperParams):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


@dataclass(frozen=True)
class HyperPrior:
    """Upper bounds of the scaled sigmoid Gaussian hyperpriors."""

    h_max: float
    l_max: np.ndarray

    def __post_init__(self):
        l_max = np.atleast_1d(np.asarray(self.l_max, dtype=float)).copy()
        l_max.setflags(write=False)
        object.__setattr__(self, "l_max", l_max)
        object.__setattr__(self, "h_max", float(self.h_max))
        bounds = np.concatenate([[self.h_max], l_max])
        if l_max.ndim != 1 or l_max.size == 0 or not np.all(np.isfinite(bounds) & (bounds > 0)):
            raise InputError(f"hyperprior bounds must be finite and positive, got {bounds}")

    @classmethod
    def isotropic(cls, h_max, l_max, dim):
        """Shared length-scale bound over ``dim`` input dimensions."""
        return cls(h_max, np.full(dim, float(l_max)))

    @property
    def dim(self):
        return self.l_max.size

    @property
    def bounds(self):
        return np.concatenate([[self.h_max], self.l_max])


def _sqdist_scaled(X, Y, length_scales):
    X = X / length_scales
    Y = Y / length_scales
    if X.shape[1] == 1:
        d2 = (X - Y.T) ** 2
    else:
        d2 = (
            np.sum(X * X, axis=1)[:, None]
            + np.sum(Y * Y, axis=1)[None, :]
            - 2.0 * X @ Y.T
        )
        np.maximum(d2, 0.0, out=d2)
    return d2


def kernel_eval(s1, s2, params):
    """Covariance between two single points."""
    s1 = np.atleast_1d(np.asarray(s1, dtype=float))
    s2 = np.atleast_1d(np.asarray(s2, dtype=float))
    if s1.shape != (params.dim,) or s2.shape != (params.dim,):
        raise InputError(
            f"points must have dimension {params.dim}, got {s1.shape} and {s2.shape}"
        )
    r2 = np.sum(((s1 - s2) / params.length_scales) ** 2)
    return params.variance * float(np.exp(-0.5 * r2))


def gram(X, Y, params):
    """Cross-covariance matrix ``K[i, j] = k(X[i], Y[j])``."""
    X = check_points(X, params.dim, name="X")
    Y = check_points(Y, params.dim, name="Y")
    d2 = _sqdist_scaled(X, Y, params.length_scales)
    d2 *= -0.5
    np.exp(d2, out=d2)
    d2 *= params.variance
    return d2


def jittered_cholesky(K, scale):
    """Lower Cholesky factor of ``K + jitter * I`` and the jitter used.

    Jitter starts at ``1e-8 * scale`` and grows tenfold on failure up to
    ``1e-4 * scale``.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    eye = np.eye(n)
    jitter = JITTER_START * scale
    while jitter <= JITTER_MAX * scale * (1 + 1e-12):
        try:
            L = linalg.cholesky(K + jitter * eye, lower=True, check_finite=False)
            return L, jitter
        except linalg.LinAlgError:
            jitter *= 10.0
    raise ConditioningError(
        f"covariance matrix of size {n} is not positive definite even with jitter "
        f"{JITTER_MAX * scale:.3g}"
    )


def sample_hyper(prior, rng, size=None):
    """Draw hyperparameters from the scaled sigmoid Gaussian prior.

    Returns one :class:`HyperParams` or, if ``size`` is given, a list.
    """
    rng = np.random.default_rng(rng)
    if size is None:
        x = rng.standard_normal(prior.dim + 1)
        return _from_latent(x, prior)
    x = rng.standard_normal((size, prior.dim + 1))
    return [_from_latent(row, prior) for row in x]


def _from_latent(x, prior):
    theta = prior.bounds * expit(x)
    return HyperParams(theta[0], theta[1:])


def hyper_from_latent(x, prior):
    """Map standard normal coordinates ``x`` to hyperparameters."""
    return _from_latent(np.asarray(x, dtype=float), prior)


def log_hyper_prior_density(params, prior):
    """Log density of ``params`` under ``prior``, in hyperparameter space.

    Includes the Jacobian of the sigmoid map. Returns ``-inf`` outside the
    open support ``(0, theta_max)``.
    """
    theta = params.as_vector()
    bounds = prior.bounds
    if theta.shape != bounds.shape:
        raise InputError(f"params have {theta.size - 1} length scales, prior has {prior.dim}")
    u = theta / bounds
    if np.any(u <= 0) or np.any(u >= 1):
        return -np.inf
    x = logit(u)
    # theta = b * sigmoid(x)  =>  dtheta/dx = b * u * (1 - u)
    log_jac = np.log(bounds) + np.log(u) + np.log1p(-u)
    return float(np.sum(-0.5 * x * x - _LOG_SQRT_2PI - log_jac))
