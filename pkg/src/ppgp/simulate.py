"""Inhomogeneous Poisson point processes: intensities and exact simulation by thinning."""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._validation import check_points
from .exceptions import InputError
from .quadrature import Domain, gauss_legendre_rule

TABULATED_SAFETY = 1.01

SYNTHETIC_DOMAIN = Domain([0.0], [50.0])


def _bimodal(X):
    t = X[:, 0]
    return 2.0 * np.exp(-t / 15.0) + np.exp(-(((t - 25.0) / 10.0) ** 2))


@dataclass(frozen=True)
class IntensitySpec:
    """A named closed-form or tabulated intensity on a rectangular domain."""

    kind: str
    domain: Domain
    params: dict = field(default_factory=dict)

    def __call__(self, X):
        X = check_points(X, self.domain.dim, allow_empty=True)
        if self.kind == "synthetic-bimodal":
            return _bimodal(X)
        if self.kind == "constant":
            return np.full(X.shape[0], float(self.params["rate"]))
        if self.kind == "piecewise":
            edges = np.asarray(self.params["breaks"], dtype=float)
            rates = np.asarray(self.params["rates"], dtype=float)
            return rates[np.searchsorted(edges, X[:, 0], side="right")]
        if self.kind == "tabulated":
            return self._interpolator()(X)
        raise InputError(f"unknown intensity kind {self.kind!r}")

    def _interpolator(self):
        axes = [np.asarray(a, dtype=float) for a in self.params["axes"]]
        values = np.asarray(self.params["values"], dtype=float)
        return RegularGridInterpolator(axes, values, method="linear", bounds_error=False,
                                       fill_value=None)

    def upper_bound(self):
        """A value dominating the intensity on the whole domain."""
        if self.kind == "synthetic-bimodal":
            return 3.0
        if self.kind == "constant":
            return float(self.params["rate"])
        if self.kind == "piecewise":
            return float(np.max(self.params["rates"]))
        if self.kind == "tabulated":
            return TABULATED_SAFETY * float(np.max(self.params["values"]))
        raise InputError(f"unknown intensity kind {self.kind!r}")

    def mean(self, p=40):
        """Average of the intensity over the domain."""
        return integral_of(self, p) / self.domain.volume


def synthetic_bimodal(domain=SYNTHETIC_DOMAIN):
    """``2 exp(-t/15) + exp(-((t - 25)/10)^2)``, by default on ``[0, 50]``."""
    return IntensitySpec("synthetic-bimodal", domain)


def constant(rate, domain):
    return IntensitySpec("constant", domain, {"rate": float(rate)})


def piecewise(breaks, rates, domain):
    """Piecewise constant in 1-D: ``rates[j]`` between ``breaks[j-1]`` and ``breaks[j]``."""
    breaks = [float(b) for b in breaks]
    rates = [float(r) for r in rates]
    if domain.dim != 1:
        raise InputError("piecewise intensities are one dimensional")
    if len(rates) != len(breaks) + 1:
        raise InputError("piecewise needs one more rate than break points")
    if any(r < 0 for r in rates):
        raise InputError("intensity must be nonnegative")
    return IntensitySpec("piecewise", domain, {"breaks": breaks, "rates": rates})


def tabulated(axes, values, domain):
    """Linear interpolation of ``values`` given on the tensor grid ``axes``."""
    axes = [np.asarray(a, dtype=float) for a in axes]
    values = np.asarray(values, dtype=float)
    if len(axes) != domain.dim or values.shape != tuple(a.size for a in axes):
        raise InputError("tabulated values do not match the grid axes")
    if np.any(values < 0):
        raise InputError("intensity must be nonnegative")
    return IntensitySpec("tabulated", domain, {"axes": axes, "values": values})


def simulate(spec, rng):
    """One draw of the Poisson process with intensity ``spec``, by thinning.

    Points of a homogeneous process at rate ``lambda_max`` are kept with
    probability ``lambda(s) / lambda_max``. One dimensional draws are sorted.
    """
    rng = np.random.default_rng(rng)
    d = spec.domain.dim
    lam_max = spec.upper_bound()
    if not lam_max > 0:
        return np.empty((0, d))
    count = rng.poisson(lam_max * spec.domain.volume)
    X = spec.domain.uniform(rng, count)
    lam = spec(X)
    if np.any(lam < 0):
        raise InputError("intensity is negative somewhere on the domain")
    if np.any(lam > lam_max * (1 + 1e-12)):
        raise InputError("intensity exceeds its declared upper bound")
    keep = rng.random(count) * lam_max < lam
    X = X[keep]
    if d == 1:
        X = np.sort(X, axis=0)
    return X


def integral_of(spec, p=40):
    """Gauss-Legendre integral of the intensity over its domain."""
    rule = gauss_legendre_rule(p, spec.domain, max_order=max(p, 1))
    return rule.integrate(spec)


def named_intensity(name, domain=None, **params):
    """Build an intensity from its command-line name."""
    if name == "synthetic-bimodal":
        return synthetic_bimodal(domain or SYNTHETIC_DOMAIN)
    if domain is None:
        raise InputError(f"intensity {name!r} needs a domain")
    if name == "constant":
        if "rate" not in params:
            raise InputError("constant intensity needs 'rate'")
        rate = float(params["rate"])
        if rate < 0:
            raise InputError("intensity must be nonnegative")
        return constant(rate, domain)
    if name == "piecewise":
        return piecewise(params["breaks"], params["rates"], domain)
    if name == "tabulated":
        return tabulated(params["axes"], params["values"], domain)
    raise InputError(f"unknown intensity {name!r}")
