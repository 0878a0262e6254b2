"""Block Gibbs sampler over inducing log-intensities and kernel hyperparameters.

Each sweep runs

1. an independence Metropolis-Hastings move on ``theta`` whose proposal is
   the hyperprior, so prior and proposal cancel in the acceptance ratio;
2. one elliptical slice sampling update of the inducing values.

The inducing values are carried in whitened form ``nu = L(theta)^-1 G`` with
``nu ~ N(0, I)`` a priori. Under that parameterization the Gaussian prior on
``G`` does not depend on ``theta`` and the MH ratio reduces to the change in
the collapsed log likelihood.
"""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InputError, NumericalError, SamplerError
from .gp_conditional import GPValues, InducingSet
from .kernel import HyperParams, HyperPrior, sample_hyper
from .posterior import PosteriorContext
from .quadrature import Domain

logger = logging.getLogger(__name__)

MAX_SHRINK = 1000


@dataclass(frozen=True)
class SamplerConfig:
    burn_in: int = 1000
    n_samples: int = 5000
    thinning: int = 1
    seed: int = 0
    quadrature_order: int = 20
    update_hyper: bool = True

    def __post_init__(self):
        if self.burn_in < 0 or self.n_samples < 1 or self.thinning < 1:
            raise InputError(
                "need burn_in >= 0, n_samples >= 1 and thinning >= 1, got "
                f"{self.burn_in}, {self.n_samples}, {self.thinning}"
            )


@dataclass
class ChainState:
    """Current position of one chain plus its cached per-theta quantities."""

    nu: np.ndarray
    params: HyperParams
    cache: object
    loglik: float
    m_star: float
    iteration: int = 0
    mh_accepted: int = 0
    mh_proposed: int = 0

    @property
    def G(self):
        return self.cache.factor.color(self.nu)

    @property
    def values(self):
        return GPValues.from_centered(self.G, self.m_star)


def init_state(ctx, params=None, nu=None):
    """Start at ``G = 0`` and the prior median of ``theta`` unless told otherwise."""
    if params is None:
        bounds = ctx.prior.bounds / 2.0
        params = HyperParams(bounds[0], bounds[1:])
    nu = np.zeros(ctx.k) if nu is None else np.asarray(nu, dtype=float)
    cache = ctx.build_cache(params)
    loglik = ctx.log_likelihood(nu, cache)
    if not np.isfinite(loglik):
        raise SamplerError("log likelihood is not finite at the initial state")
    return ChainState(nu=nu, params=params, cache=cache, loglik=loglik, m_star=ctx.m_star)


def _safe_loglik(ctx, nu, cache):
    try:
        value = ctx.log_likelihood(nu, cache)
    except NumericalError as exc:
        logger.debug("log likelihood evaluation failed: %s", exc)
        return -np.inf
    return value if np.isfinite(value) else -np.inf


def mh_hyper_step(state, ctx, rng, proposal=None):
    """One independence MH update of ``theta`` with the prior as proposal."""
    if proposal is None:
        proposal = sample_hyper(ctx.prior, rng)
    log_u = np.log(rng.random())
    state = replace(state, mh_proposed=state.mh_proposed + 1)
    try:
        cache = ctx.build_cache(proposal)
    except NumericalError as exc:
        logger.info("rejecting theta=%s: %s", proposal.as_vector(), exc)
        return state
    loglik = _safe_loglik(ctx, state.nu, cache)
    if log_u < loglik - state.loglik:
        return replace(state, params=proposal, cache=cache, loglik=loglik,
                       mh_accepted=state.mh_accepted + 1)
    return state


def ess_step(state, ctx, rng):
    """One elliptical slice sampling update of the inducing values."""
    k = state.nu.size
    if k == 0:
        return state
    prior_draw = rng.standard_normal(k)
    threshold = state.loglik + np.log(rng.random())
    angle = rng.uniform(0.0, 2.0 * np.pi)
    lo, hi = angle - 2.0 * np.pi, angle
    for _ in range(MAX_SHRINK):
        nu = state.nu * np.cos(angle) + prior_draw * np.sin(angle)
        loglik = _safe_loglik(ctx, nu, state.cache)
        if loglik > threshold:
            return replace(state, nu=nu, loglik=loglik)
        if angle < 0.0:
            lo = angle
        else:
            hi = angle
        angle = rng.uniform(lo, hi)
    raise SamplerError(f"elliptical slice sampling did not accept after {MAX_SHRINK} shrinks")


class DataSummary:
    """Streaming moments of the per-draw predictive law at the data points.

    Per draw the data log-intensity is Gaussian with mean ``M + v`` and
    variance ``v``. Welford updates keep memory at ``O(n)``.
    """

    def __init__(self, n):
        self.count = 0
        self.mean_tilted = np.zeros(n)
        self.m2_tilted = np.zeros(n)
        self.mean_var = np.zeros(n)
        self.mean_intensity = np.zeros(n)

    @property
    def n(self):
        return self.mean_var.size

    def update(self, tilted, var):
        self.count += 1
        c = self.count
        delta = tilted - self.mean_tilted
        self.mean_tilted += delta / c
        self.m2_tilted += delta * (tilted - self.mean_tilted)
        self.mean_var += (var - self.mean_var) / c
        self.mean_intensity += (np.exp(tilted + 0.5 * var) - self.mean_intensity) / c

    @classmethod
    def from_draws(cls, tilted, var):
        tilted = np.atleast_2d(np.asarray(tilted, dtype=float))
        var = np.atleast_2d(np.asarray(var, dtype=float))
        out = cls(tilted.shape[1])
        for t, v in zip(tilted, var):
            out.update(t, v)
        return out

    @property
    def between_var(self):
        """Population variance across draws of the conditional means."""
        return self.m2_tilted / max(self.count, 1)

    def to_dict(self):
        return {
            "count": self.count,
            "mean_tilted": self.mean_tilted,
            "m2_tilted": self.m2_tilted,
            "mean_var": self.mean_var,
            "mean_intensity": self.mean_intensity,
        }

    @classmethod
    def from_dict(cls, d):
        out = cls(len(d["mean_var"]))
        out.count = int(d["count"])
        for name in ("mean_tilted", "m2_tilted", "mean_var", "mean_intensity"):
            setattr(out, name, np.asarray(d[name], dtype=float))
        return out


@dataclass
class PosteriorSamples:
    """Post burn-in draws of one or more chains."""

    inducing: InducingSet
    domain: Domain
    m_star: float
    log_lambda: np.ndarray
    output_scale: np.ndarray
    length_scales: np.ndarray
    loglik: np.ndarray
    data_summary: DataSummary | None = None
    acceptance_rate: float = float("nan")
    n_iterations: int = 0
    wall_seconds: float = float("nan")
    seed: int | None = None
    quadrature_order: int = 20
    hyperprior: HyperPrior | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return self.log_lambda.shape[0]

    def params(self, i):
        return HyperParams(self.output_scale[i], self.length_scales[i])

    def effective_sample_sizes(self):
        """ESS of every inducing log-intensity."""
        return np.array([effective_sample_size(col) for col in self.log_lambda.T])

    def ess_per_1000(self):
        """Average ESS over inducing log-intensities, per 1000 draws."""
        if self.n_draws < 10:
            return float("nan")
        return float(np.mean(self.effective_sample_sizes()) * 1000.0 / self.n_draws)

    @classmethod
    def pool(cls, chains):
        """Concatenate draws of independent chains sharing the same model."""
        first = chains[0]
        summary = None
        if all(c.data_summary is not None for c in chains):
            summary = _pool_summaries([c.data_summary for c in chains])
        accepted = sum(c.acceptance_rate * c.n_iterations for c in chains)
        iterations = sum(c.n_iterations for c in chains)
        return replace(
            first,
            log_lambda=np.concatenate([c.log_lambda for c in chains]),
            output_scale=np.concatenate([c.output_scale for c in chains]),
            length_scales=np.concatenate([c.length_scales for c in chains]),
            loglik=np.concatenate([c.loglik for c in chains]),
            data_summary=summary,
            acceptance_rate=accepted / iterations if iterations else float("nan"),
            n_iterations=iterations,
            wall_seconds=max(c.wall_seconds for c in chains),
            extra={"chains": len(chains)},
        )


def _pool_summaries(parts):
    out = DataSummary(parts[0].n)
    for p in parts:
        if p.count == 0:
            continue
        total = out.count + p.count
        delta = p.mean_tilted - out.mean_tilted
        out.m2_tilted = out.m2_tilted + p.m2_tilted + delta ** 2 * out.count * p.count / total
        out.mean_tilted = out.mean_tilted + delta * p.count / total
        out.mean_var = out.mean_var + (p.mean_var - out.mean_var) * p.count / total
        out.mean_intensity = (
            out.mean_intensity + (p.mean_intensity - out.mean_intensity) * p.count / total
        )
        out.count = total
    return out


def run_chain(data, inducing, domain, config, hyperprior, rng=None, *, ctx=None,
              init_params=None, callback=None):
    """Run one block Gibbs chain and collect thinned post burn-in draws.

    ``rng`` defaults to a generator seeded with ``config.seed``. A prebuilt
    ``ctx`` may be passed to reuse or replace the likelihood.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if not isinstance(inducing, InducingSet):
        inducing = InducingSet(inducing)
    if inducing.k == 0:
        raise InputError("run_chain needs at least one inducing point")
    if ctx is None:
        ctx = PosteriorContext(data, inducing, domain, hyperprior,
                               quadrature_order=config.quadrature_order)
    n_draws = config.n_samples
    k, d = inducing.k, domain.dim
    log_lambda = np.empty((n_draws, k))
    out_scale = np.empty(n_draws)
    lengths = np.empty((n_draws, d))
    loglik = np.empty(n_draws)
    summary = DataSummary(ctx.n) if ctx.keep_data_block else None

    def collect(n_kept, error=None):
        mh = state.mh_proposed
        return PosteriorSamples(
            inducing=inducing, domain=domain, m_star=ctx.m_star,
            log_lambda=log_lambda[:n_kept].copy(), output_scale=out_scale[:n_kept].copy(),
            length_scales=lengths[:n_kept].copy(), loglik=loglik[:n_kept].copy(),
            data_summary=summary,
            acceptance_rate=state.mh_accepted / mh if mh else float("nan"),
            n_iterations=state.iteration, wall_seconds=time.perf_counter() - t0,
            seed=config.seed, quadrature_order=config.quadrature_order,
            hyperprior=hyperprior, extra={} if error is None else {"error": str(error)},
        )

    t0 = time.perf_counter()
    state = init_state(ctx, params=init_params)
    total = config.burn_in + n_draws * config.thinning
    kept = 0
    try:
        for it in range(total):
            if config.update_hyper:
                state = mh_hyper_step(state, ctx, rng)
            state = ess_step(state, ctx, rng)
            state.iteration = it + 1
            past = it - config.burn_in
            if past >= 0 and past % config.thinning == 0:
                G = state.G
                log_lambda[kept] = ctx.m_star + G
                out_scale[kept] = state.params.output_scale
                lengths[kept] = state.params.length_scales
                loglik[kept] = state.loglik
                if summary is not None and ctx.n:
                    var = state.cache.data_var
                    summary.update(state.cache.mean_at_data(state.nu, ctx.m_star) + var, var)
                kept += 1
            if callback is not None:
                callback(it, state)
    except SamplerError as exc:
        exc.partial = collect(kept, exc)
        raise
    return collect(kept)


def effective_sample_size(series):
    """Effective sample size with Geyer's initial monotone sequence estimator.

    ``n / (1 + 2 sum_t rho_t)`` where the autocorrelation sum is truncated at
    the first non-positive pair sum and pair sums are forced non-increasing.
    A constant series has ESS 1.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise InputError(f"need at least 10 values for an ESS estimate, got {n}")
    x = x - x.mean()
    if np.all(x == 0.0) or np.var(x) <= 1e-300:
        return 1.0
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[:n] / n
    rho = acov / acov[0]
    n_pairs = n // 2
    pairs = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    positive = pairs > 0
    stop = n_pairs if positive.all() else int(np.argmin(positive))
    pairs = np.minimum.accumulate(pairs[:stop])
    tau = -1.0 + 2.0 * float(np.sum(pairs))
    if tau <= 0:
        return float(n)
    return n / tau
