"""File formats shared by the command line and the estimators.

* events: headerless CSV, one event per row, ``d`` coordinates
* inducing points: JSON with the selection trace
* posterior samples: JSON
* grid estimates: CSV with a header row
* manifests: JSON sidecars holding timings and provenance of a run

Floats are written with 17 significant digits (or Python's shortest
round-trip repr in JSON), so every file reads back bit for bit. Data files
carry no timestamps; those go to the manifests only.
"""

import csv
import io
import json
import os
from datetime import datetime, timezone

import numpy as np

from .exceptions import DataError
from .gp_conditional import InducingSet
from .kernel import HyperPrior
from .mcmc import DataSummary, PosteriorSamples
from .predict import IntensityEstimate
from .quadrature import Domain
from .selection import SelectionTrace, thetas_from_list, thetas_to_list

FORMAT_VERSION = 1
GRID_COLUMNS = ("log_mean", "log_var", "intensity_mean", "lo_band", "hi_band")


def fmt(x):
    return format(float(x), ".17g")


def _tolist(a):
    return np.asarray(a, dtype=float).tolist()


def _write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {what} {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{what} {path} is not valid JSON: {exc}") from exc


def _write_json(path, obj):
    _write_text(path, json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")


# events

def write_events(path, X):
    X = np.asarray(X, dtype=float)
    _write_text(path, "".join(",".join(fmt(v) for v in row) + "\n" for row in X))


def read_events(path, dim=None):
    """Read an event CSV; blank lines are skipped, errors name the line."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read events {path}: {exc.strerror}") from exc
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: not a row of numbers: {line.strip()!r}") from exc
        if not all(np.isfinite(row)):
            raise DataError(f"{path}:{lineno}: non-finite coordinate")
        if rows and len(row) != len(rows[0]):
            raise DataError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(row)}")
        if dim is not None and len(row) != dim:
            raise DataError(f"{path}:{lineno}: expected {dim} columns, got {len(row)}")
        rows.append(row)
    if not rows:
        return np.empty((0, dim or 1))
    return np.array(rows, dtype=float)


# manifests

def manifest_path(path):
    return f"{path}.manifest.json"


def write_manifest(path, payload):
    body = dict(payload)
    body["written_at"] = datetime.now(timezone.utc).isoformat()
    body["format_version"] = FORMAT_VERSION
    _write_json(manifest_path(path), _clean(body))


def read_manifest(path):
    return _read_json(manifest_path(path), "manifest")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# domains and priors

def domain_to_dict(domain):
    return {"lower": _tolist(domain.lower), "upper": _tolist(domain.upper)}


def domain_from_dict(d):
    return Domain(d["lower"], d["upper"])


def prior_to_dict(prior):
    return {"h_max": float(prior.h_max), "l_max": _tolist(prior.l_max)}


def prior_from_dict(d):
    return HyperPrior(d["h_max"], d["l_max"])


# inducing points

def write_inducing(path, trace, domain, prior, *, k=None, alpha=None, target_utility=None):
    """Inducing points (the first ``k`` of the trace) plus the full trace."""
    k = trace.k if k is None else int(k)
    _write_json(path, _clean({
        "format_version": FORMAT_VERSION,
        "domain": domain_to_dict(domain),
        "prior": prior_to_dict(prior),
        "inducing_points": trace.points[:k],
        "k": k,
        "alpha": alpha,
        "target_utility": target_utility,
        "trace": {
            "points": trace.points,
            "utilities": trace.utilities,
            "normalized_utilities": trace.normalized,
            "w_inf": trace.w_inf,
            "theta_samples": thetas_to_list(trace.theta_samples),
            "seed": trace.seed,
        },
    }))


def read_inducing(path):
    """Returns ``(inducing_set, trace, domain)``."""
    d = _read_json(path, "inducing file")
    try:
        domain = domain_from_dict(d["domain"])
        points = np.asarray(d["inducing_points"], dtype=float).reshape(-1, domain.dim)
        t = d["trace"]
        trace = SelectionTrace(
            np.asarray(t["points"], dtype=float).reshape(-1, domain.dim),
            np.asarray(t["utilities"], dtype=float),
            float(t["w_inf"]),
            thetas_from_list(t["theta_samples"]),
            t.get("seed"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"inducing file {path} is malformed: {exc}") from exc
    return InducingSet(points), trace, domain


# posterior samples

def samples_to_dict(samples):
    summary = samples.data_summary
    return _clean({
        "format_version": FORMAT_VERSION,
        "domain": domain_to_dict(samples.domain),
        "prior": None if samples.hyperprior is None else prior_to_dict(samples.hyperprior),
        "inducing_points": samples.inducing.locations,
        "m_star": samples.m_star,
        "seed": samples.seed,
        "quadrature_order": samples.quadrature_order,
        "n_iterations": samples.n_iterations,
        "acceptance_rate": samples.acceptance_rate,
        "ess_per_1000": samples.ess_per_1000(),
        "log_lambda": samples.log_lambda,
        "output_scale": samples.output_scale,
        "length_scales": samples.length_scales,
        "loglik": samples.loglik,
        "data_summary": None if summary is None else summary.to_dict(),
        "extra": samples.extra,
    })


def samples_from_dict(d):
    domain = domain_from_dict(d["domain"])
    k_dim = domain.dim
    log_lambda = np.asarray(d["log_lambda"], dtype=float)
    inducing = InducingSet(np.asarray(d["inducing_points"], dtype=float).reshape(-1, k_dim))
    log_lambda = log_lambda.reshape(-1, inducing.k)
    summary = d.get("data_summary")
    prior = d.get("prior")
    return PosteriorSamples(
        inducing=inducing,
        domain=domain,
        m_star=float(d["m_star"]),
        log_lambda=log_lambda,
        output_scale=np.asarray(d["output_scale"], dtype=float).reshape(-1),
        length_scales=np.asarray(d["length_scales"], dtype=float).reshape(-1, k_dim),
        loglik=np.asarray(d["loglik"], dtype=float).reshape(-1),
        data_summary=None if summary is None else DataSummary.from_dict(summary),
        acceptance_rate=_nan(d.get("acceptance_rate")),
        n_iterations=int(d.get("n_iterations", 0)),
        seed=d.get("seed"),
        quadrature_order=int(d.get("quadrature_order", 20)),
        hyperprior=None if prior is None else prior_from_dict(prior),
        extra=d.get("extra") or {},
    )


def _nan(v):
    return float("nan") if v is None else float(v)


def write_samples(path, samples):
    _write_json(path, samples_to_dict(samples))


def read_samples(path):
    d = _read_json(path, "samples file")
    try:
        return samples_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"samples file {path} is malformed: {exc}") from exc


# grid estimates

def grid_header(dim):
    names = ["x"] if dim == 1 else [f"x{j + 1}" for j in range(dim)]
    return names + list(GRID_COLUMNS)


def write_estimate(path, estimate):
    X = np.asarray(estimate.locations, dtype=float)
    dim = X.shape[1]
    cols = [estimate.log_mean, estimate.log_var, estimate.intensity_mean,
            estimate.lower_band, estimate.upper_band]
    buf = io.StringIO()
    buf.write(",".join(grid_header(dim)) + "\n")
    for i in range(X.shape[0]):
        buf.write(",".join([fmt(v) for v in X[i]] + [fmt(c[i]) for c in cols]) + "\n")
    _write_text(path, buf.getvalue())


def read_estimate(path):
    """Read a grid CSV; axes are rebuilt when the points form a full tensor grid."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read estimate {path}: {exc.strerror}") from exc
    if not rows:
        raise DataError(f"estimate {path} is empty")
    header = [h.strip() for h in rows[0]]
    dim = len(header) - len(GRID_COLUMNS)
    if dim < 1 or header != grid_header(dim):
        raise DataError(f"estimate {path} has an unexpected header {header}")
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise DataError(f"estimate {path} contains a non-numeric value") from exc
    if body.ndim != 2 or body.shape[0] == 0:
        raise DataError(f"estimate {path} has no rows")
    X = body[:, :dim]
    axes = [np.unique(X[:, j]) for j in range(dim)]
    if int(np.prod([a.size for a in axes])) != X.shape[0]:
        axes = None
    return IntensityEstimate(
        locations=X, log_mean=body[:, dim], log_var=body[:, dim + 1],
        intensity_mean=body[:, dim + 2], axes=axes,
    )
