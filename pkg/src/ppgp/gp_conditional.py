"""Moments of a stationary GP conditioned on its values at inducing points.

Given inducing locations ``Z`` with values ``G`` (log-intensities minus the
constant prior mean ``m*``), the conditional process has

    m(s)          = m* + K(s, Z) K(Z, Z)^-1 G
    cov(s1, s2)   = k(s1, s2) - K(s1, Z) K(Z, Z)^-1 K(Z, s2)

Everything is computed through the whitened cross-covariance
``A = L^-1 K(Z, X)`` where ``L L^T = K(Z, Z) + jitter I``, so no ``n x n``
matrix is ever formed for ``n`` query points.
"""

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._validation import check_points
from .exceptions import ConditioningError, InputError
from .kernel import gram, jittered_cholesky

NEGATIVE_VARIANCE_TOL = 1e-8


@dataclass(frozen=True)
class InducingSet:
    """Inducing locations, one point per row."""

    locations: np.ndarray

    def __post_init__(self):
        Z = np.asarray(self.locations, dtype=float)
        if Z.ndim == 1:
            Z = Z.reshape(-1, 1)
        if Z.ndim != 2:
            raise InputError(f"inducing locations must be 2-D, got shape {Z.shape}")
        Z = Z.copy()
        Z.setflags(write=False)
        if Z.shape[0] > 1 and np.unique(Z, axis=0).shape[0] != Z.shape[0]:
            raise InputError("inducing locations contain exact duplicates")
        object.__setattr__(self, "locations", Z)

    @property
    def k(self):
        return self.locations.shape[0]

    @property
    def dim(self):
        return self.locations.shape[1]

    def __len__(self):
        return self.k

    def __eq__(self, other):
        if not isinstance(other, InducingSet):
            return NotImplemented
        return self.locations.shape == other.locations.shape and np.array_equal(
            self.locations, other.locations
        )

    def __hash__(self):
        return hash((self.locations.shape, self.locations.tobytes()))


@dataclass(frozen=True)
class GPValues:
    """Log-intensities at the inducing points and the prior constant mean."""

    log_lambda: np.ndarray
    m_star: float

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.log_lambda, dtype=float)).copy()
        v.setflags(write=False)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise InputError("log_lambda must be a finite vector")
        object.__setattr__(self, "log_lambda", v)
        object.__setattr__(self, "m_star", float(self.m_star))

    @classmethod
    def from_centered(cls, G, m_star):
        return cls(np.asarray(G, dtype=float) + m_star, m_star)

    @property
    def centered(self):
        """``G``: log-intensities minus ``m*``."""
        return self.log_lambda - self.m_star


class InducingFactor:
    """Jittered Cholesky factor of ``K(Z, Z)`` for one (inducing set, theta) pair."""

    def __init__(self, inducing, params):
        if inducing.k and inducing.dim != params.dim:
            raise InputError(
                f"inducing points have dimension {inducing.dim}, kernel has {params.dim}"
            )
        self.inducing = inducing
        self.params = params
        if inducing.k:
            K = gram(inducing.locations, inducing.locations, params)
            self.chol, self.jitter = jittered_cholesky(K, params.variance)
            self.chol.setflags(write=False)
        else:
            self.chol = np.zeros((0, 0))
            self.jitter = 0.0

    @property
    def k(self):
        return self.inducing.k

    def whiten(self, X):
        """``L^-1 K(Z, X)``, shape ``(k, n)``."""
        X = check_points(X, self.params.dim)
        if not self.k:
            return np.zeros((0, X.shape[0]))
        Kzx = gram(self.inducing.locations, X, self.params)
        return linalg.solve_triangular(self.chol, Kzx, lower=True, check_finite=False)

    def whiten_values(self, G):
        """``L^-1 G`` for centered inducing values ``G``."""
        G = np.asarray(G, dtype=float)
        if G.shape != (self.k,):
            raise InputError(f"expected {self.k} inducing values, got shape {G.shape}")
        if not self.k:
            return G
        return linalg.solve_triangular(self.chol, G, lower=True, check_finite=False)

    def color(self, nu):
        """Inverse of :meth:`whiten_values`: ``G = L nu``."""
        return self.chol @ nu if self.k else np.asarray(nu, dtype=float)

    def variance_from_whitened(self, A):
        """Conditional variances from a whitened block, clamped at zero."""
        h2 = self.params.variance
        var = h2 - np.einsum("ij,ij->j", A, A)
        return clamp_variance(var, h2)

    def log_prior(self, G):
        """``log N(G | 0, K(Z, Z) + jitter I)``."""
        nu = self.whiten_values(G)
        logdet = 2.0 * np.sum(np.log(np.diag(self.chol)))
        return float(-0.5 * nu @ nu - 0.5 * logdet - 0.5 * self.k * np.log(2 * np.pi))


def clamp_variance(var, h2):
    """Clamp roundoff negatives to zero; raise on real violations."""
    lowest = np.min(var) if np.size(var) else 0.0
    if lowest < -NEGATIVE_VARIANCE_TOL * h2:
        raise ConditioningError(
            f"conditional variance {lowest:.3e} is negative beyond roundoff (h^2={h2:.3g})"
        )
    return np.maximum(var, 0.0)


class _FactorCache:
    """Small LRU of factorizations keyed by (inducing set, theta)."""

    def __init__(self, maxsize=64):
        self.maxsize = maxsize
        self._items = OrderedDict()
        self._lock = threading.Lock()

    def get(self, inducing, params):
        key = (hash(inducing), inducing.locations.tobytes(), params.key())
        with self._lock:
            hit = self._items.get(key)
            if hit is not None:
                self._items.move_to_end(key)
                return hit
        factor = InducingFactor(inducing, params)
        with self._lock:
            self._items[key] = factor
            while len(self._items) > self.maxsize:
                self._items.popitem(last=False)
        return factor

    def clear(self):
        with self._lock:
            self._items.clear()


_CACHE = _FactorCache()


def factorize(inducing, params):
    """Shared, cached :class:`InducingFactor`."""
    if not isinstance(inducing, InducingSet):
        inducing = InducingSet(inducing)
    return _CACHE.get(inducing, params)


def conditional_mean(query, inducing, values, params):
    """Conditional mean ``m(s)`` at each query point."""
    factor = factorize(inducing, params)
    X = check_points(query, params.dim, name="query")
    if not factor.k:
        return np.full(X.shape[0], values.m_star)
    A = factor.whiten(X)
    return values.m_star + A.T @ factor.whiten_values(values.centered)


def conditional_cov_diag(query, inducing, params):
    """Conditional variances ``cov(s, s)`` at each query point."""
    factor = factorize(inducing, params)
    X = check_points(query, params.dim, name="query")
    return factor.variance_from_whitened(factor.whiten(X))


def conditional_cov_full(query, inducing, params):
    """Full conditional covariance matrix of the query points."""
    factor = factorize(inducing, params)
    X = check_points(query, params.dim, name="query")
    A = factor.whiten(X)
    C = gram(X, X, params) - A.T @ A
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, clamp_variance(np.diag(C).copy(), params.variance))
    return C


def trace_reduction(data, inducing, params, *, chunk_size=65536):
    """``Tr(K(D, Z) K(Z, Z)^-1 K(Z, D))`` in ``O(n k^2)`` time.

    Data are processed in chunks so peak memory stays ``O(k * chunk_size)``.
    """
    factor = factorize(inducing, params)
    X = check_points(data, params.dim, name="data")
    if not factor.k:
        raise InputError("trace_reduction needs at least one inducing point")
    total = 0.0
    for start in range(0, X.shape[0], chunk_size):
        A = factor.whiten(X[start:start + chunk_size])
        total += float(np.einsum("ij,ij->", A, A))
    return total
