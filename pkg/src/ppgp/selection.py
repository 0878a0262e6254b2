"""Greedy selection of inducing points by expected variance reduction.

The utility of an inducing set ``Z`` is the total reduction of the prior
variance of the log-intensity at the data points, averaged over ``N``
hyperparameter draws from the prior:

    U(Z) = 1/N sum_i Tr(K_i(D, Z) K_i(Z, Z)^-1 K_i(Z, D))

Points are added one at a time, each maximizing ``U``, until the relative
gain ``(u_k - u_{k-1}) / u_k`` falls below ``alpha``. ``u_k`` is bounded by
``w_inf = 1/N sum_i n h_i^2``, reached once ``Z`` contains the data.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import minimize

from ._validation import check_points
from .exceptions import ConditioningError, InputError, SelectionError
from .gp_conditional import InducingFactor, InducingSet, trace_reduction
from .kernel import HyperParams, HyperPrior, gram, sample_hyper

logger = logging.getLogger(__name__)

SUBSAMPLE_LIMIT = 20000
SEED_POOL = 512
CANDIDATE_CHUNK = 64


@dataclass(frozen=True)
class SelectionConfig:
    prior: HyperPrior
    alpha: float = 1e-3
    n_theta: int = 20
    restarts: int = 8
    max_points: int = 256
    nm_maxiter: int = 200
    seed: int | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_theta < 1:
            raise InputError(f"n_theta must be positive, got {self.n_theta}")
        if self.restarts < 0 or self.max_points < 1:
            raise InputError("restarts must be >= 0 and max_points >= 1")


@dataclass
class SelectionTrace:
    """Inducing points in selection order with the utility after each."""

    points: np.ndarray
    utilities: np.ndarray
    w_inf: float
    theta_samples: list = field(default_factory=list)
    seed: int | None = None

    @property
    def k(self):
        return self.points.shape[0]

    @property
    def normalized(self):
        return self.utilities / self.w_inf

    @property
    def inducing(self):
        return InducingSet(self.points)

    def k_for(self, level):
        """Smallest ``k`` whose normalized utility reaches ``level``, else ``None``."""
        hit = np.flatnonzero(self.normalized >= level)
        return int(hit[0]) + 1 if hit.size else None

    def truncate(self, k):
        return SelectionTrace(self.points[:k].copy(), self.utilities[:k].copy(), self.w_inf,
                              list(self.theta_samples), self.seed)


def average_unconditional_variance(n, theta_samples):
    """``w_inf``: mean over theta of the total prior variance at ``n`` points."""
    return float(np.mean([n * t.variance for t in theta_samples]))


def utility(candidate_set, data, theta_samples):
    """Monte Carlo estimate of the expected total variance reduction."""
    if candidate_set is None or len(candidate_set) == 0:
        return 0.0
    Z = candidate_set if isinstance(candidate_set, InducingSet) else InducingSet(candidate_set)
    total = 0.0
    for i, theta in enumerate(theta_samples):
        try:
            total += trace_reduction(data, Z, theta)
        except ConditioningError as exc:
            raise ConditioningError(
                f"hyperparameter sample {i} (h={theta.output_scale:.4g}, "
                f"l={theta.length_scales}) : {exc}"
            ) from exc
    return total / len(theta_samples)


class _GainEvaluator:
    """Incremental utility of adding one point to the current set.

    For each theta the conditional covariance given the current set is
    ``c(x, s) = k(x, s) - a_x . a_s`` with whitened blocks ``a``, and adding
    ``s`` reduces the total variance by ``sum_j c(s_j, s)^2 / c(s, s)``.
    All theta samples are handled in one batch of array operations.
    """

    def __init__(self, current, data, theta_samples, scale=1.0):
        self.data = data
        self.scale = scale
        self.current = current
        self.h2 = np.array([t.variance for t in theta_samples])
        self.inv_ls = np.array([1.0 / t.length_scales for t in theta_samples])
        factors = [InducingFactor(current, t) for t in theta_samples]
        k = current.k
        if k:
            # L^-1 per theta so that candidates are whitened by a batched matmul
            self.linv = np.stack([
                linalg.solve_triangular(f.chol, np.eye(k), lower=True, check_finite=False)
                for f in factors
            ])
            self.blocks = np.stack([f.whiten(data) for f in factors])
            jitter = np.array([f.jitter for f in factors])
            self.floor = np.maximum(1e-7 * self.h2, 10.0 * jitter)
        else:
            self.floor = 1e-7 * self.h2
        n_theta = len(theta_samples)
        self.chunk = max(1, min(CANDIDATE_CHUNK, 4_000_000 // max(1, n_theta * data.shape[0])))

    def _batched_gram(self, X, Y):
        """``(N, len(X), len(Y))`` kernel matrices for all theta samples."""
        Xs = X[None, :, :] * self.inv_ls[:, None, :]
        Ys = Y[None, :, :] * self.inv_ls[:, None, :]
        d2 = np.zeros((self.h2.size, X.shape[0], Y.shape[0]))
        for j in range(X.shape[1]):
            d2 += (Xs[:, :, j, None] - Ys[:, None, :, j]) ** 2
        return self.h2[:, None, None] * np.exp(-0.5 * d2)

    def __call__(self, C):
        C = np.atleast_2d(C)
        out = np.zeros(C.shape[0])
        for start in range(0, C.shape[0], self.chunk):
            Cc = C[start:start + self.chunk]
            cross = self._batched_gram(self.data, Cc)
            if self.current.k:
                Azc = self.linv @ self._batched_gram(self.current.locations, Cc)
                cross -= np.swapaxes(self.blocks, 1, 2) @ Azc
                v = self.h2[:, None] - np.einsum("tij,tij->tj", Azc, Azc)
            else:
                v = np.broadcast_to(self.h2[:, None], (self.h2.size, Cc.shape[0]))
            gain = np.einsum("tij,tij->tj", cross, cross)
            ok = v > self.floor[:, None]
            ratio = np.where(ok, gain / np.where(ok, v, 1.0), 0.0)
            out[start:start + Cc.shape[0]] = ratio.sum(axis=0)
        return out * (self.scale / self.h2.size)


def argmax_next_point(current, data, theta_samples, domain, rng, *, restarts=8, nm_maxiter=200,
                      scale=1.0):
    """Point of the domain with the largest incremental utility.

    Multi-start Nelder-Mead: half of the starts are the best data points of a
    random pool of at most 512, half are uniform in the domain. The winner is
    compared against every pool point, so the result is never worse than the
    best data point. Returns ``(point, gain)``.
    """
    data = check_points(data, domain.dim, name="data")
    if not isinstance(current, InducingSet):
        current = InducingSet(np.asarray(current, dtype=float).reshape(-1, domain.dim))
    gain = _GainEvaluator(current, data, theta_samples, scale)

    n = data.shape[0]
    pool = data if n <= SEED_POOL else data[np.sort(rng.choice(n, SEED_POOL, replace=False))]
    pool_gain = gain(pool)
    n_data_starts = (restarts + 1) // 2
    order = np.argsort(-pool_gain, kind="stable")
    starts = [pool[i] for i in order[:n_data_starts]]
    starts += list(domain.uniform(rng, restarts - n_data_starts))

    best_point = pool[order[0]].copy()
    best_gain = pool_gain[order[0]]

    lo, hi = domain.lower, domain.upper
    xatol = 1e-7 * float(np.min(domain.widths))

    def objective(x):
        return -gain(np.clip(x, lo, hi)[None, :])[0]

    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"maxiter": nm_maxiter * domain.dim, "xatol": xatol,
                                "fatol": 1e-12 * max(best_gain, 1e-300),
                                "initial_simplex": _simplex(x0, domain)})
        x = np.clip(res.x, lo, hi)
        g = gain(x[None, :])[0]
        if g > best_gain:
            best_point, best_gain = x, g
    return best_point, float(best_gain)


def _simplex(x0, domain):
    step = 0.05 * domain.widths
    pts = [x0]
    for j in range(domain.dim):
        x = x0.copy()
        x[j] = x[j] + step[j] if x[j] + step[j] <= domain.upper[j] else x[j] - step[j]
        pts.append(x)
    return np.array(pts)


def select_inducing_points(data, domain, config, rng=None):
    """Greedy inducing point selection; returns a :class:`SelectionTrace`."""
    rng = np.random.default_rng(config.seed if rng is None else rng)
    data = check_points(data, domain.dim, name="data")
    n = data.shape[0]
    if n == 0:
        raise InputError("inducing point selection needs at least one data point")
    thetas = sample_hyper(config.prior, rng, size=config.n_theta)
    w_inf = average_unconditional_variance(n, thetas)

    if n > SUBSAMPLE_LIMIT:
        sub = data[np.sort(rng.choice(n, SUBSAMPLE_LIMIT, replace=False))]
        scale = n / SUBSAMPLE_LIMIT
    else:
        sub, scale = data, 1.0

    points = []
    utilities = []
    u_prev = 0.0
    while True:
        if len(points) >= config.max_points:
            trace = SelectionTrace(np.array(points), np.array(utilities), w_inf, thetas, config.seed)
            raise SelectionError(
                f"selection did not meet alpha={config.alpha} within {config.max_points} points",
                trace=trace,
            )
        current = InducingSet(np.array(points).reshape(-1, domain.dim))
        s, _ = argmax_next_point(current, sub, thetas, domain, rng, restarts=config.restarts,
                                 nm_maxiter=config.nm_maxiter, scale=scale)
        if points and np.any(np.all(np.array(points) == s, axis=1)):
            logger.info("best candidate repeats an inducing point; stopping at k=%d", len(points))
            break
        candidate = InducingSet(np.vstack(points + [s]))
        u_k = utility(candidate, data, thetas)
        points.append(s)
        utilities.append(u_k)
        e = (u_k - u_prev) / u_k
        logger.debug("k=%d u=%.6g e=%.3g", len(points), u_k, e)
        u_prev = u_k
        if e < config.alpha:
            break
    return SelectionTrace(np.array(points), np.array(utilities), w_inf, thetas, config.seed)


def thetas_to_list(thetas):
    return [t.as_vector().tolist() for t in thetas]


def thetas_from_list(rows):
    return [HyperParams.from_vector(r) for r in rows]
