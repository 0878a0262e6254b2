"""Run configuration: a flat ``key = value`` text file plus overrides.

Lines are ``key = value``; blank lines and lines starting with ``#`` are
ignored. Lists are comma separated. ``seed`` is mandatory. Overrides given
on the command line as ``key=value`` replace file values.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from .exceptions import InputError
from .quadrature import MAX_ORDER, Domain


class ConfigError(InputError):
    """Malformed configuration; reported as a usage error."""

    exit_code = 2

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


@dataclass
class RunConfig:
    seed: int
    domain_lower: list = None
    domain_upper: list = None
    h_max: float = 10.0
    l_max: list = field(default_factory=lambda: [25.0])
    fit_h_max: float = 0.25
    fit_l_max: list = None
    quadrature_order: int = 20
    n_theta: int = 20
    alpha: float = 1e-3
    target_utility: float = 0.95
    restarts: int = 8
    max_points: int = 256
    burn_in: int = 1000
    n_samples: int = 5000
    thinning: int = 1
    chains: int = 1
    grid_points: int = 500
    rate: float = None
    breaks: list = None
    rates: list = None
    table: str = None

    PARSERS = {
        "seed": _int, "domain_lower": _float_list, "domain_upper": _float_list,
        "h_max": float, "l_max": _float_list, "fit_h_max": float, "fit_l_max": _float_list,
        "quadrature_order": _int, "n_theta": _int, "alpha": float, "target_utility": float,
        "restarts": _int, "max_points": _int, "burn_in": _int, "n_samples": _int,
        "thinning": _int, "chains": _int, "grid_points": _int, "rate": float,
        "breaks": _float_list, "rates": _float_list, "table": str,
    }

    def __post_init__(self):
        checks = [
            ("h_max", self.h_max > 0, "must be positive"),
            ("fit_h_max", self.fit_h_max > 0, "must be positive"),
            ("l_max", all(v > 0 for v in self.l_max), "must be positive"),
            ("fit_l_max", self.fit_l_max is None or all(v > 0 for v in self.fit_l_max),
             "must be positive"),
            ("quadrature_order", 1 <= self.quadrature_order <= MAX_ORDER,
             f"must lie in [1, {MAX_ORDER}]"),
            ("n_theta", self.n_theta >= 1, "must be >= 1"),
            ("alpha", 0 < self.alpha < 1, "must lie in (0, 1)"),
            ("target_utility", 0 < self.target_utility <= 1, "must lie in (0, 1]"),
            ("restarts", self.restarts >= 0, "must be >= 0"),
            ("max_points", self.max_points >= 1, "must be >= 1"),
            ("burn_in", self.burn_in >= 0, "must be >= 0"),
            ("n_samples", self.n_samples >= 1, "must be >= 1"),
            ("thinning", self.thinning >= 1, "must be >= 1"),
            ("chains", self.chains >= 1, "must be >= 1"),
            ("grid_points", self.grid_points >= 2, "must be >= 2"),
        ]
        for key, ok, message in checks:
            if not ok:
                raise ConfigError(f"{key} {message}, got {getattr(self, key)!r}", key=key)
        if (self.domain_lower is None) != (self.domain_upper is None):
            raise ConfigError("domain_lower and domain_upper must be given together")
        if self.domain_lower is not None:
            try:
                Domain(self.domain_lower, self.domain_upper)
            except InputError as exc:
                raise ConfigError(str(exc), key="domain_lower") from exc

    @property
    def domain(self):
        if self.domain_lower is None:
            return None
        return Domain(self.domain_lower, self.domain_upper)

    def require_domain(self):
        if self.domain_lower is None:
            raise ConfigError("configuration needs domain_lower and domain_upper")
        return self.domain

    def scales(self, dim, *, fit=False):
        """``(h_max, l_max)`` with ``l_max`` broadcast to ``dim``."""
        h = self.fit_h_max if fit else self.h_max
        lengths = (self.fit_l_max or self.l_max) if fit else self.l_max
        lengths = np.broadcast_to(np.asarray(lengths, dtype=float), (dim,)) \
            if len(lengths) in (1, dim) else None
        if lengths is None:
            raise ConfigError(f"length scale bounds do not match dimension {dim}")
        return h, lengths.copy()

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _parse_value(key, text, where):
    if key not in RunConfig.PARSERS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        return RunConfig.PARSERS[key](text.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from exc


def parse_config(text, source="<config>", overrides=()):
    """Parse config text; ``overrides`` is a sequence of ``key=value`` strings."""
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r} (first set on line {lines[key]})")
        values[key] = _parse_value(key, value, where)
        lines[key] = lineno
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        values[key] = _parse_value(key, value, f"override {item!r}")
        lines[key] = "override"
    if "seed" not in values:
        raise ConfigError(f"{source}: 'seed' is mandatory")
    try:
        return RunConfig(**values)
    except ConfigError as exc:
        line = lines.get(exc.key)
        where = source if line is None else (
            f"override {exc.key}" if line == "override" else f"{source}:{line}")
        raise ConfigError(f"{where}: {exc}", key=exc.key) from exc


def load_config(path, overrides=()):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, source=str(path), overrides=overrides)
