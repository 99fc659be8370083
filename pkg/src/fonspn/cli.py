"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 every trial diverged.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import warnings

import numpy as np

from . import config as config_mod
from .filterbank import DesignError, design_bank, prototype_cutoff
from .harness import export_csv, knee, parse_grid, run_experiment, steady_state_msd_empirical, sweep_mu, to_db, write_rows
from .scenarios import config_moments
from .signalgen import AlphaStableParams
from .theory import InstabilityError, beta_range, msd_model_limit, steady_state_msd, step_size_bound

log = logging.getLogger("fonspn")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _add_config_args(p, with_out=True):
    p.add_argument("--config", required=True, help="TOML experiment file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--mu", type=float, help="override algo.mu")
    p.add_argument("--trials", type=int, help="override run.trials")
    p.add_argument("--samples", type=int, help="override run.total_samples")
    p.add_argument("--seed", type=int, help="override run.master_seed")
    p.add_argument("--workers", type=int, help="override run.workers")
    if with_out:
        p.add_argument("--out", help="CSV output path")


def _settings(args):
    overrides = list(args.overrides)
    for flag, key in (("mu", "algo.mu"), ("trials", "run.trials"), ("samples", "run.total_samples"),
                      ("seed", "run.master_seed"), ("workers", "run.workers")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    return config_mod.load(args.config, overrides)


def _noise_alpha(cfg) -> float:
    d = cfg.noise_source.driving
    return d.alpha if isinstance(d, AlphaStableParams) else 2.0


def _moments(settings):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return config_moments(settings.experiment, settings.moment_frames, settings.moment_seed)


def cmd_design_bank(args) -> int:
    try:
        bank = design_bank(args.bands, args.len)
    except DesignError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    rows = [[f"# bands = {bank.num_bands}"], [f"# length = {bank.length}"],
            [f"# prototype_cutoff = {prototype_cutoff(args.bands, args.len)!r}"]]
    rows += [[repr(float(c)) for c in band] for band in bank.coeffs]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    else:
        csv.writer(sys.stdout).writerows(rows)
    return EXIT_OK


def bounds_table(settings) -> list:
    cfg = settings.experiment
    a = cfg.algo
    rows = []
    alpha = _noise_alpha(cfg)
    try:
        interval = beta_range(a.p, alpha)
        rows += [("beta_lower", interval.lower), ("beta_upper", interval.upper),
                 ("beta_in_range", int(a.beta in interval))]
    except ValueError as exc:
        log.warning("beta interval undefined: %s", exc)
    m = _moments(settings)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bound = step_size_bound(m, a.taps, a.beta)
        h0 = cfg.system()
        bound_h0 = step_size_bound(m, a.taps, a.beta, h0_norm_sq=float(h0 @ h0))
        limit = msd_model_limit(m, a.taps)
        try:
            msd = steady_state_msd(m, a.taps, a.mu, a.beta)
        except InstabilityError:
            msd = math.inf
    rows += [("mu_bound", bound), ("mu_bound_h0", bound_h0), ("msd_model_limit", limit),
             ("mu", a.mu), ("steady_msd", msd), ("steady_msd_db", to_db(msd)),
             ("model_exact", int(abs(a.p - a.beta - 1.0) < 1e-9)), ("heavy_tail", int(m.heavy_tail))]
    return rows


def cmd_bounds(args) -> int:
    settings = _settings(args)
    rows = bounds_table(settings)
    for name, value in rows:
        print(f"{name},{value!r}" if isinstance(value, float) else f"{name},{value}")
    if args.out:
        write_rows(args.out, ("quantity", "value"), rows, settings.experiment.describe())
    return EXIT_OK


def cmd_simulate(args) -> int:
    settings = _settings(args)
    cfg = settings.experiment
    log.info("simulating %s: %d trials x %d samples", cfg.algo.label(), cfg.trials, cfg.total_samples)
    trace = run_experiment(cfg, settings.workers)
    if args.out:
        export_csv(trace, args.out, cfg.describe())
    if trace.all_diverged:
        log.error("all %d trials diverged", trace.trials)
        return EXIT_DIVERGED
    window = min(cfg.steady_window, trace.length)
    ss = steady_state_msd_empirical(trace, window)
    print(f"final_nmsd_db,{ss.db!r}")
    print(f"diverged_trials,{trace.diverged_trials}")
    return EXIT_OK


def _mu_values(args, settings, text):
    grid = parse_grid(text)
    if args.relative:
        m = _moments(settings)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            bound = step_size_bound(m, settings.experiment.taps, settings.experiment.algo.beta)
        return grid * bound, bound
    return grid, None


def cmd_sweep_mu(args) -> int:
    settings = _settings(args)
    cfg = settings.experiment
    mus, bound = _mu_values(args, settings, args.grid)
    points = sweep_mu(cfg, mus, settings.workers)
    rows = [(pt.mu, pt.steady.db, pt.steady.linear, pt.diverged_trials, pt.trials) for pt in points]
    meta = cfg.describe()
    if bound is not None:
        meta["mu_bound"] = bound
    meta["knee"] = knee(points)
    if args.out:
        write_rows(args.out, ("mu", "steady_msd_db", "steady_msd", "diverged_trials", "trials"), rows, meta)
    for row in rows:
        print(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    if all(pt.diverged_trials == pt.trials for pt in points):
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_steady(args) -> int:
    settings = _settings(args)
    cfg = settings.experiment
    mus, _ = _mu_values(args, settings, args.mu_list)
    m = _moments(settings)
    rows = []
    all_diverged = True
    for mu in mus:
        trace = run_experiment(cfg.replace(mu=float(mu)), settings.workers)
        all_diverged &= trace.all_diverged
        sim = steady_state_msd_empirical(trace, min(cfg.steady_window, trace.length), normalized=False)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                theory = steady_state_msd(m, cfg.taps, float(mu), cfg.algo.beta)
            except InstabilityError:
                theory = math.inf
        rows.append((float(mu), sim.db, to_db(theory), trace.diverged_trials))
    if args.out:
        write_rows(args.out, ("mu", "msd_sim_db", "msd_theory_db", "diverged_trials"), rows, cfg.describe())
    for row in rows:
        print(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return EXIT_DIVERGED if all_diverged else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fonspn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-bank", help="dump analysis filter coefficients as CSV")
    p.add_argument("--bands", type=int, default=4)
    p.add_argument("--len", type=int, default=32)
    p.add_argument("--out")
    p.set_defaults(func=cmd_design_bank)

    p = sub.add_parser("bounds", help="beta interval, step-size bound and steady-state prediction")
    _add_config_args(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="Monte Carlo NMSD learning curve")
    _add_config_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep-mu", help="empirical steady-state MSD over a step-size grid")
    _add_config_args(p)
    p.add_argument("--grid", required=True, help="start:stop:step or comma list")
    p.add_argument("--relative", action="store_true", help="grid values are multiples of the step-size bound")
    p.set_defaults(func=cmd_sweep_mu)

    p = sub.add_parser("steady", help="simulated vs predicted steady-state MSD")
    _add_config_args(p)
    p.add_argument("--mu-list", required=True, help="comma list or start:stop:step")
    p.add_argument("--relative", action="store_true", help="values are multiples of the step-size bound")
    p.set_defaults(func=cmd_steady)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except config_mod.ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
