"""Accuracy metrics against a known intensity and held-out predictive scores."""

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import logsumexp

from ._validation import check_in_domain
from .exceptions import DataError, InputError
from .gp_conditional import InducingFactor


@dataclass
class EvalReport:
    mae: float
    rmse: float
    lp_mean: float
    lp_sd: float
    ess_per_1000: float = float("nan")
    wall_seconds: float = float("nan")
    lp_per_draw_mean: float = float("nan")
    lp_per_draw_sd: float = float("nan")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps({k: _jsonable(v) for k, v in self.to_dict().items()}, indent=2,
                          sort_keys=True)

    def to_text(self):
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.to_dict().items())


def _jsonable(v):
    v = float(v)
    return v if np.isfinite(v) else None


def _fmt(v):
    return repr(float(v)) if np.isfinite(v) else "nan"


def normalized_errors(estimate, truth, grid=None):
    """MAE and RMSE of the posterior mean intensity, relative to the mean truth.

    ``estimate`` is an :class:`~ppgp.predict.IntensityEstimate` or an array
    of intensity values at ``grid``.
    """
    if hasattr(estimate, "intensity_mean"):
        values = estimate.intensity_mean
        grid = estimate.locations if grid is None else grid
    else:
        values = np.asarray(estimate, dtype=float)
    if grid is None:
        raise InputError("a grid is required for raw intensity values")
    true = truth(grid)
    if values.shape != true.shape:
        raise InputError("estimate and grid sizes differ")
    scale = float(np.mean(true))
    if scale == 0:
        raise InputError("true intensity has zero mean on the grid")
    err = values - true
    return float(np.mean(np.abs(err)) / scale), float(np.sqrt(np.mean(err ** 2)) / scale)


class GridIntensity:
    """Intensity tabulated on a regular grid spanning the domain."""

    def __init__(self, estimate, domain):
        self.domain = domain
        values = np.asarray(estimate.intensity_mean, dtype=float)
        if domain.dim == 1:
            x = np.asarray(estimate.locations, dtype=float).ravel()
            order = np.argsort(x)
            self.axes = [x[order]]
            self.values = values[order]
        else:
            if estimate.axes is None:
                raise InputError("a 2-D estimate must carry its grid axes")
            self.axes = [np.asarray(a, dtype=float) for a in estimate.axes]
            self.values = values.reshape([a.size for a in self.axes])
        tol = 1e-9 * domain.widths
        for j, a in enumerate(self.axes):
            if abs(a[0] - domain.lower[j]) > tol[j] or abs(a[-1] - domain.upper[j]) > tol[j]:
                raise DataError("estimate grid does not span the domain")
        self._interp = RegularGridInterpolator(self.axes, self.values, method="linear")

    def integral(self):
        out = self.values
        for a in reversed(self.axes):
            out = np.trapezoid(out, a, axis=-1)
        return float(out)

    def __call__(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.domain.dim)
        return self._interp(X)


def point_process_loglik(intensity_at_events, integral):
    """``-int lambda + sum_i log lambda(s_i)``."""
    lam = np.asarray(intensity_at_events, dtype=float)
    if np.any(lam <= 0):
        return -np.inf
    return float(-integral + np.sum(np.log(lam)))


def log_predictive(estimate, heldout, domain):
    """Held-out log likelihood of the plug-in posterior mean intensity.

    Returns the mean and the standard deviation over held-out draws.
    """
    surface = GridIntensity(estimate, domain)
    integral = surface.integral()
    scores = []
    for events in heldout:
        X = check_in_domain(events, domain, name="held-out events")
        scores.append(point_process_loglik(surface(X), integral))
    return _mean_sd(scores)


def _mean_sd(scores):
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise InputError("no held-out draws")
    sd = float(np.std(scores, ddof=1)) if scores.size > 1 else 0.0
    return float(np.mean(scores)), sd


def log_predictive_per_draw(samples, heldout, n_per_dim=500, max_draws=1000):
    """Held-out score averaging the likelihood over posterior draws.

    ``log mean_d L(lambda_d | events)`` with ``lambda_d = exp(m + v/2)`` per
    draw, computed on an evenly thinned subset of at most ``max_draws``.
    """
    domain = samples.domain
    X, axes = domain.grid(n_per_dim if domain.dim == 1 else min(n_per_dim, 100))
    events = [check_in_domain(e, domain, name="held-out events") for e in heldout]
    idx = np.unique(np.linspace(0, samples.n_draws - 1, min(max_draws, samples.n_draws)).astype(int))
    per_draw = np.empty((len(events), idx.size))
    factor = None
    for col, i in enumerate(idx):
        params = samples.params(i)
        if factor is None or factor.params != params:
            factor = InducingFactor(samples.inducing, params)
            blocks = [factor.whiten(X)] + [factor.whiten(e) if len(e) else None for e in events]
            variances = [factor.variance_from_whitened(b) if b is not None else None for b in blocks]
        nu = factor.whiten_values(samples.log_lambda[i] - samples.m_star)
        lam = np.exp(samples.m_star + blocks[0].T @ nu + 0.5 * variances[0])
        integral = _grid_integral(lam, axes)
        for row in range(len(events)):
            b, v = blocks[row + 1], variances[row + 1]
            log_lam = 0.0 if b is None else float(np.sum(samples.m_star + b.T @ nu + 0.5 * v))
            per_draw[row, col] = -integral + log_lam
    scores = logsumexp(per_draw, axis=1) - np.log(idx.size)
    return _mean_sd(scores)


def _grid_integral(values, axes):
    out = values.reshape([a.size for a in axes])
    for a in reversed(axes):
        out = np.trapezoid(out, a, axis=-1)
    return float(out)
