"""Command line: ``ppgp {simulate,select,fit,predict,evaluate}``.

Every command reads a flat ``key = value`` config file (``--config``) whose
entries may be overridden with ``--set key=value``. Exit codes: 0 success,
2 usage or configuration error, 3 data error, 4 numerical error.
"""

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import persistence as io
from ._validation import check_in_domain
from .config import load_config
from .exceptions import DataError, InputError, PPGPError, SamplerError
from .kernel import HyperPrior
from .mcmc import PosteriorSamples, SamplerConfig, run_chain
from .metrics import EvalReport, log_predictive, log_predictive_per_draw, normalized_errors
from .predict import predictive_on_domain_grid
from .selection import SelectionConfig, select_inducing_points
from .simulate import integral_of, named_intensity, simulate

logger = logging.getLogger("ppgp")

INTENSITIES = ("synthetic-bimodal", "constant", "piecewise", "tabulated")


def _read_table(path, domain):
    """Tabulated intensity: rows ``x_1, ..., x_d, value`` on a full tensor grid."""
    rows = io.read_events(path)
    if rows.shape[1] != domain.dim + 1:
        raise DataError(f"{path}: expected {domain.dim + 1} columns")
    axes = [np.unique(rows[:, j]) for j in range(domain.dim)]
    shape = tuple(a.size for a in axes)
    if int(np.prod(shape)) != rows.shape[0]:
        raise DataError(f"{path}: points do not form a full grid")
    values = np.empty(shape)
    idx = tuple(np.searchsorted(a, rows[:, j]) for j, a in enumerate(axes))
    values[idx] = rows[:, -1]
    return axes, values


def _intensity(name, cfg):
    domain = cfg.domain
    params = {}
    if name == "constant" and cfg.rate is not None:
        params["rate"] = cfg.rate
    elif name == "piecewise":
        if cfg.breaks is None or cfg.rates is None:
            raise InputError("piecewise intensity needs 'breaks' and 'rates'")
        params = {"breaks": cfg.breaks, "rates": cfg.rates}
    elif name == "tabulated":
        if cfg.table is None or domain is None:
            raise InputError("tabulated intensity needs 'table' and a domain")
        params["axes"], params["values"] = _read_table(cfg.table, domain)
    return named_intensity(name, domain, **params)


def cmd_simulate(args, cfg):
    spec = _intensity(args.intensity, cfg)
    rng = np.random.default_rng(cfg.seed)
    X = simulate(spec, rng)
    io.write_events(args.out, X)
    io.write_manifest(args.out, {
        "command": "simulate", "intensity": args.intensity, "params": spec.params,
        "domain": io.domain_to_dict(spec.domain), "seed": cfg.seed, "count": X.shape[0],
        "integral": integral_of(spec, 40),
    })
    print(f"wrote {X.shape[0]} events to {args.out}")


def cmd_select(args, cfg):
    domain = cfg.require_domain()
    X = io.read_events(args.events, domain.dim)
    X = check_in_domain(X, domain, name=f"events in {args.events}")
    h, lengths = cfg.scales(domain.dim)
    prior = HyperPrior(h, lengths)
    config = SelectionConfig(prior, alpha=cfg.alpha, n_theta=cfg.n_theta,
                             restarts=cfg.restarts, max_points=cfg.max_points, seed=cfg.seed)
    t0 = time.perf_counter()
    trace = select_inducing_points(X, domain, config)
    k = trace.k_for(cfg.target_utility) or trace.k
    io.write_inducing(args.out, trace, domain, prior, k=k, alpha=cfg.alpha,
                      target_utility=cfg.target_utility)
    io.write_manifest(args.out, {
        "command": "select", "events": args.events, "seed": cfg.seed,
        "wall_seconds": time.perf_counter() - t0, "k": k, "k_total": trace.k,
    })
    print(f"selected {trace.k} points; keeping k={k} "
          f"(normalized utility {trace.normalized[k - 1]:.4f})")


def _chain_job(job):
    data, inducing, domain, config, prior = job
    return run_chain(data, inducing, domain, config, prior)


def _chain_seeds(seed, chains):
    if chains == 1:
        return [seed]
    children = np.random.SeedSequence(seed).spawn(chains)
    return [int(c.generate_state(1)[0]) for c in children]


def cmd_fit(args, cfg):
    domain = cfg.require_domain()
    inducing, _, inducing_domain = io.read_inducing(args.inducing)
    if inducing_domain != domain:
        raise DataError("inducing file was selected on a different domain than the config")
    X = check_in_domain(io.read_events(args.events, domain.dim), domain,
                        name=f"events in {args.events}")
    h, lengths = cfg.scales(domain.dim, fit=True)
    prior = HyperPrior(h, lengths)
    chains = args.chains or cfg.chains
    jobs = [(X, inducing, domain,
             SamplerConfig(burn_in=cfg.burn_in, n_samples=cfg.n_samples, thinning=cfg.thinning,
                           seed=s, quadrature_order=cfg.quadrature_order), prior)
            for s in _chain_seeds(cfg.seed, chains)]
    t0 = time.perf_counter()
    try:
        if chains == 1:
            parts = [_chain_job(jobs[0])]
        else:
            with ProcessPoolExecutor(max_workers=chains) as pool:
                parts = list(pool.map(_chain_job, jobs))
    except SamplerError as exc:
        if exc.partial is not None:
            io.write_samples(args.out, exc.partial)
        io.write_manifest(args.out, {"command": "fit", "seed": cfg.seed, "error": str(exc),
                                     "partial_draws": getattr(exc.partial, "n_draws", 0)})
        raise
    samples = parts[0] if chains == 1 else PosteriorSamples.pool(parts)
    samples.seed = cfg.seed
    wall = time.perf_counter() - t0
    io.write_samples(args.out, samples)
    ess = samples.ess_per_1000()
    io.write_manifest(args.out, {
        "command": "fit", "events": args.events, "inducing": args.inducing, "seed": cfg.seed,
        "chains": chains, "chain_seeds": [j[3].seed for j in jobs], "wall_seconds": wall,
        "chain_wall_seconds": [p.wall_seconds for p in parts],
        "acceptance_rate": samples.acceptance_rate, "ess_per_1000": ess,
        "n_draws": samples.n_draws,
    })
    print(f"{samples.n_draws} draws, acceptance {samples.acceptance_rate:.3f}, "
          f"ESS/1000 {ess:.1f}, {wall:.1f} s")


def cmd_predict(args, cfg):
    samples = io.read_samples(args.samples)
    if cfg.domain is not None and cfg.domain != samples.domain:
        raise DataError("samples were fitted on a different domain than the config")
    n = args.grid_points or cfg.grid_points
    estimate = predictive_on_domain_grid(samples, n)
    io.write_estimate(args.out, estimate)
    print(f"wrote {len(estimate)} grid rows to {args.out}")


def cmd_evaluate(args, cfg):
    domain = cfg.require_domain()
    estimate = io.read_estimate(args.estimate)
    if estimate.locations.shape[1] != domain.dim:
        raise DataError("estimate and config domain have different dimensions")
    if not np.all(domain.contains(estimate.locations)):
        raise DataError("estimate grid lies outside the configured domain")
    truth = _intensity(args.truth, cfg)
    if truth.domain != domain:
        raise DataError("truth intensity and config use different domains")
    mae, rmse = normalized_errors(estimate, truth)
    heldout = [io.read_events(p, domain.dim) for p in args.heldout]
    lp_mean, lp_sd = log_predictive(estimate, heldout, domain) if heldout else (np.nan, np.nan)
    report = EvalReport(mae=mae, rmse=rmse, lp_mean=lp_mean, lp_sd=lp_sd)
    if args.samples:
        samples = io.read_samples(args.samples)
        if samples.domain != domain:
            raise DataError("samples were fitted on a different domain than the config")
        report.ess_per_1000 = samples.ess_per_1000()
        try:
            report.wall_seconds = float(io.read_manifest(args.samples).get("wall_seconds"))
        except (DataError, TypeError):
            pass
        if heldout:
            report.lp_per_draw_mean, report.lp_per_draw_sd = log_predictive_per_draw(
                samples, heldout)
    base = args.out[:-5] if args.out.endswith(".json") else args.out
    io._write_text(base + ".json", report.to_json() + "\n")
    io._write_text(base + ".txt", report.to_text())
    sys.stdout.write(report.to_text())


def build_parser():
    parser = argparse.ArgumentParser(prog="ppgp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="key = value configuration file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a configuration entry")
        p.add_argument("--out", required=True, help="output path")
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "simulate events from a known intensity")
    p.add_argument("--intensity", required=True, choices=INTENSITIES)

    p = add("select", cmd_select, "greedy inducing point selection")
    p.add_argument("--events", required=True)

    p = add("fit", cmd_fit, "posterior sampling")
    p.add_argument("--events", required=True)
    p.add_argument("--inducing", required=True)
    p.add_argument("--chains", type=int, default=None,
                   help="independent chains run in parallel and pooled")

    p = add("predict", cmd_predict, "posterior summaries on a regular grid")
    p.add_argument("--samples", required=True)
    p.add_argument("--grid-points", type=int, default=None, help="grid points per dimension")

    p = add("evaluate", cmd_evaluate, "accuracy and held-out scores")
    p.add_argument("--estimate", required=True)
    p.add_argument("--truth", required=True, choices=INTENSITIES)
    p.add_argument("--heldout", nargs="*", default=[])
    p.add_argument("--samples", default=None, help="samples file for ESS and timing")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "chains", None) is not None and args.chains < 1:
        parser.error("--chains must be >= 1")
    if getattr(args, "grid_points", None) is not None and args.grid_points < 2:
        parser.error("--grid-points must be >= 2")
    try:
        cfg = load_config(args.config, args.overrides)
        args.func(args, cfg)
    except PPGPError as exc:
        print(f"ppgp {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
