"""Gauss-Legendre rules on rectangles and moment matching of the integral prior.

The integral ``I = int_S lambda(s) ds`` of the conditional log-Gaussian
intensity has mean and variance

    mu_I     = int f(s) ds,               f(s)       = exp(m(s) + v(s)/2)
    sigma2_I = int int g(s1, s2) - mu_I^2, g(s1, s2)  = f(s1) f(s2) exp(c(s1, s2))

with ``m``, ``v`` and ``c`` the conditional mean, variance and covariance.
Both are evaluated with a tensor Gauss-Legendre rule and matched to a
Gamma(shape=mu^2/sigma2, scale=sigma2/mu).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import check_points
from .exceptions import InputError, NumericalError, RangeError
from .gp_conditional import conditional_cov_full, conditional_mean

MAX_ORDER = 64
MAX_DIM = 2
SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle ``[lower, upper]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise InputError(f"domain bounds have mismatched shapes {lo.shape} and {hi.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
            raise InputError(f"domain needs finite lower < upper, got {lo} and {hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.size

    @property
    def widths(self):
        return self.upper - self.lower

    @property
    def volume(self):
        return float(np.prod(self.widths))

    def contains(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)

    def uniform(self, rng, size):
        return self.lower + self.widths * rng.random((size, self.dim))

    def grid(self, n_per_dim):
        """Regular grid including the boundary; returns ``(points, axes)``."""
        axes = [np.linspace(a, b, n_per_dim) for a, b in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh]), axes

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


def _legendre_and_derivative(p, x):
    """``P_p(x)`` and ``P_p'(x)`` by the three-term recurrence."""
    prev = np.ones_like(x)
    cur = x.copy()
    for j in range(2, p + 1):
        prev, cur = cur, ((2 * j - 1) * x * cur - (j - 1) * prev) / j
    if p == 1:
        return cur, np.ones_like(x)
    return cur, p * (x * cur - prev) / (x * x - 1.0)


@lru_cache(maxsize=None)
def legendre_nodes(p):
    """Roots and weights of the order ``p`` Legendre rule on ``[-1, 1]``.

    Newton iteration started from ``cos(pi (i - 1/4) / (p + 1/2))``.
    """
    if p < 1:
        raise InputError(f"quadrature order must be positive, got {p}")
    i = np.arange(1, p + 1)
    x = np.cos(np.pi * (i - 0.25) / (p + 0.5))
    for _ in range(100):
        P, dP = _legendre_and_derivative(p, x)
        step = P / dP
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    _, dP = _legendre_and_derivative(p, x)
    w = 2.0 / ((1.0 - x * x) * dP * dP)
    order = np.argsort(x)
    x, w = x[order], w[order]
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule mapped onto a rectangle."""

    order: int
    domain: Domain
    nodes: np.ndarray
    weights: np.ndarray
    ref_nodes: np.ndarray
    ref_weights: np.ndarray

    @property
    def size(self):
        return self.weights.size

    def integrate(self, f):
        """Integrate a vectorized callable ``f(points) -> values``."""
        return float(self.weights @ np.asarray(f(self.nodes), dtype=float))


def gauss_legendre_rule(p, domain, *, max_order=MAX_ORDER):
    """Order ``p`` rule per dimension on ``domain`` (``p**d`` nodes)."""
    p = int(p)
    if not (1 <= p <= max_order):
        raise InputError(f"quadrature order must be in [1, {max_order}], got {p}")
    if domain.dim > MAX_DIM:
        raise InputError(f"quadrature supports dimension <= {MAX_DIM}, got {domain.dim}")
    x, w = legendre_nodes(p)
    half = 0.5 * domain.widths
    mid = 0.5 * (domain.upper + domain.lower)
    axes = [half[j] * x + mid[j] for j in range(domain.dim)]
    axw = [half[j] * w for j in range(domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh])
    weights = axw[0]
    for wj in axw[1:]:
        weights = np.outer(weights, wj).ravel()
    nodes.setflags(write=False)
    weights = np.ascontiguousarray(weights)
    weights.setflags(write=False)
    return QuadratureRule(p, domain, nodes, weights, x, w)


@dataclass(frozen=True)
class GammaMoments:
    mu_I: float
    sigma2_I: float
    alpha_I: float
    beta_I: float

    @classmethod
    def from_mean_variance(cls, mu, sigma2):
        mu = float(mu)
        sigma2 = float(sigma2)
        if not (np.isfinite(mu) and mu > 0):
            raise NumericalError(f"integral mean must be positive, got {mu}")
        if not (np.isfinite(sigma2) and sigma2 > 0):
            raise NumericalError(f"integral variance must be positive, got {sigma2}")
        return cls(mu, sigma2, mu * mu / sigma2, sigma2 / mu)

    def log_mgf_at_minus_one(self):
        """``log E[exp(-I)] = -alpha log(1 + beta)``."""
        return -self.alpha_I * np.log1p(self.beta_I)


def moment_match(weights, node_mean, node_var, node_cov_expm1):
    """Gamma moments from conditional moments at the quadrature nodes.

    ``node_cov_expm1`` is ``expm1`` of the conditional covariance between
    nodes, so ``sigma2 = sum_ij w_i f_i w_j f_j expm1(c_ij)`` avoids the
    cancellation of ``E[I^2] - mu^2``.
    """
    log_f = np.asarray(node_mean, dtype=float) + 0.5 * np.asarray(node_var, dtype=float)
    with np.errstate(over="ignore"):
        f = np.exp(log_f)
    if not np.all(np.isfinite(f)):
        bad = int(np.flatnonzero(~np.isfinite(f))[0])
        raise RangeError(f"exp overflow in integral mean at quadrature node {bad} (log f={log_f[bad]:.4g})")
    wf = weights * f
    mu = float(np.sum(wf))
    with np.errstate(over="ignore", invalid="ignore"):
        sigma2 = float(wf @ node_cov_expm1 @ wf)
    if not np.isfinite(sigma2):
        row = np.flatnonzero(~np.isfinite(node_cov_expm1 @ wf))
        bad = int(row[0]) if row.size else -1
        raise RangeError(f"exp overflow in integral variance near quadrature node {bad}")
    if not mu > 0:
        raise NumericalError(f"integral mean must be positive, got {mu}")
    sigma2 = max(sigma2, SIGMA2_FLOOR * mu * mu)
    return GammaMoments.from_mean_variance(mu, sigma2)


def gamma_moments(inducing, values, params, rule):
    """Moment-matched Gamma parameters of the integral of the intensity."""
    nodes = check_points(rule.nodes, params.dim)
    mean = conditional_mean(nodes, inducing, values, params)
    cov = conditional_cov_full(nodes, inducing, params)
    return moment_match(rule.weights, mean, np.diag(cov), np.expm1(cov))
