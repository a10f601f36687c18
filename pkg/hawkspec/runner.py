import argparse
from dataclasses import replace
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import pandas as pd
from dotenv import load_dotenv
from rich.logging import RichHandler

from hawkspec.bench import run_experiment
from hawkspec.contrasts import ContrastKind
from hawkspec.core import DomainError, EstimationFailure, RngStream
from hawkspec.crossval import CvGrid, block_loocv, estimate, pthin_cv
from hawkspec.executor import simulate_replication
from hawkspec.hawkes import HawkesParams
from hawkspec.persistence import (
    ensure_output_dir,
    load_config,
    read_events,
    save_report,
    write_events,
)
from hawkspec.planner import (
    ConfigError,
    EstimatorTask,
    ExperimentConfig,
    PenaltyMode,
    parse_estimators,
    plan_battery,
    tasks_to_dicts,
)
from hawkspec.spectral import fourier_grid
from hawkspec.ui import console, emit_plots, render_estimate, render_summary_table, show_plan

logger = logging.getLogger("hawkspec")

EXIT_USAGE = 2


def setup_logging(level: str) -> None:
    logging.basicConfig(level=level.upper(), format="%(message)s", datefmt="[%X]",
                        handlers=[RichHandler(console=console, show_path=False)], force=True)


def prompt_confirmation() -> bool:
    console.print("\nRun this plan? [y/N]")
    choice = input("Run: ").strip().lower()
    return choice in ("y", "yes")


def _env_overrides(env: Mapping[str, str]) -> Dict[str, Any]:
    changes: Dict[str, Any] = {}
    try:
        if env.get("HAWKSPEC_SEED"):
            changes["seed"] = int(env["HAWKSPEC_SEED"])
        if env.get("HAWKSPEC_JOBS"):
            changes["jobs"] = int(env["HAWKSPEC_JOBS"])
    except ValueError as exc:
        raise ConfigError(f"bad HAWKSPEC_* environment value: {exc}") from exc
    if env.get("HAWKSPEC_OUT"):
        changes["output_dir"] = Path(env["HAWKSPEC_OUT"])
    return changes


def resolve_config(args: argparse.Namespace, env: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """Defaults, then the config file, then HAWKSPEC_* variables, then command-line flags."""
    env = os.environ if env is None else env
    config = ExperimentConfig.from_mapping(load_config(args.config)) if args.config else ExperimentConfig()
    config = config.with_overrides(**_env_overrides(env))
    config = config.with_overrides(seed=args.seed, jobs=args.jobs,
                                   output_dir=Path(args.out) if args.out else None)
    if getattr(args, "n_sim", None) is not None:
        config = config.with_overrides(n_sim=args.n_sim)
    if getattr(args, "horizons", None):
        config = config.with_overrides(horizons=tuple(args.horizons))
    if getattr(args, "estimators", None):
        config = config.with_overrides(estimators=tuple(plan_battery(parse_estimators(args.estimators))))
    if getattr(args, "p", None) is not None:
        config = config.with_overrides(cv=CvGrid((args.p,), config.cv.kappa_values, config.cv.n_thinnings))
    return config


def cmd_simulate(args, config: ExperimentConfig) -> int:
    """Write the patterns the benchmark would simulate for these horizons and replications."""
    if any(v is not None for v in (args.mu, args.alpha, args.beta)):
        p = config.true_params
        params = HawkesParams(p.mu if args.mu is None else args.mu,
                              p.alpha if args.alpha is None else args.alpha,
                              p.beta if args.beta is None else args.beta)
        config = replace(config, true_params=params)
    out = ensure_output_dir(config.output_dir)
    for T in config.horizons:
        for rep in range(config.n_sim):
            pattern = simulate_replication(config, T, rep)
            path = out / f"events_T{T:g}_rep{rep}.txt"
            write_events(pattern, path)
            logger.info("wrote %d events to %s", pattern.count(), path)
    return 0


def _clean(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def estimate_report(task: EstimatorTask, pattern, config: ExperimentConfig, half_width: float) -> Dict[str, Any]:
    """Fit one estimator to one pattern and describe the fit as a JSON-ready dict."""
    kind = task.estimator
    freq_grid = fourier_grid(pattern.window.length(), half_width) if kind.is_spectral else None
    rng = RngStream(config.seed).derive("estimate", kind.value, task.mode.value)
    report: Dict[str, Any] = {"estimator": kind.value, "mode": task.mode.value, "n_events": pattern.count(),
                              "T": pattern.window.length(), "p_hat": None, "kappa_hat": None}
    if task.mode is PenaltyMode.NONE:
        est = estimate(pattern, kind, 0.0, freq_grid, rng)
        theta, converged = est.theta, est.converged
    else:
        if task.mode is PenaltyMode.PTHIN:
            cv = pthin_cv(pattern, kind, config.cv, freq_grid, rng)
        else:
            cv = block_loocv(pattern, kind, config.kappas_for(kind), config.loocv_k, freq_grid, rng)
        theta, converged = cv.final_estimate, cv.final_converged
        report.update(p_hat=_clean(cv.selected_p), kappa_hat=_clean(cv.selected_kappa))
        report["cv"] = {
            "p_values": [_clean(p) for p in cv.p_values],
            "kappa_values": list(cv.kappa_values),
            "mean_errors": [[_clean(e) for e in row] for row in cv.mean_errors],
        }
    report["theta"] = {name: _clean(v) for name, v in zip(("mu", "alpha", "beta"), theta)}
    report["converged"] = bool(converged)
    return report


def cmd_estimate(args, config: ExperimentConfig) -> int:
    pattern = read_events(args.events)
    try:
        task = EstimatorTask(1, ContrastKind(args.estimator.upper()), PenaltyMode(args.mode))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = estimate_report(task, pattern, config, args.half_width or config.half_width)
    render_estimate(report)
    if args.report:
        save_report(report, args.report)
        logger.info("report written to %s", args.report)
    return 0


def cmd_benchmark(args, config: ExperimentConfig) -> int:
    ensure_output_dir(config.output_dir)
    show_plan(tasks_to_dicts(list(config.estimators)), config.n_sim, config.horizons)
    if args.confirm and not prompt_confirmation():
        console.print("Cancelled.")
        return 0
    result = run_experiment(config, progress=not args.quiet)
    if not result.summary.empty:
        render_summary_table(result.summary)
    if not args.no_plots:
        emit_plots(result.summary, result.selections, config.output_dir)
    return 0


def cmd_plot(args, config: ExperimentConfig) -> int:
    summary = pd.read_csv(args.summary)
    selections_path = Path(args.selections) if args.selections else Path(args.summary).with_name("selections.csv")
    selections = pd.read_csv(selections_path) if selections_path.exists() else None
    out = ensure_output_dir(args.out or Path(args.summary).parent)
    for path in emit_plots(summary, selections, out):
        logger.info("wrote %s", path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Spectral and temporal estimation for exponential Hawkes processes')
    parser.add_argument('--config', help='JSON config file with truth/simulation/spectral/estimators/pthin/loocv/run sections')
    parser.add_argument('--seed', type=int, help='Master seed')
    parser.add_argument('--out', help='Output directory')
    parser.add_argument('--jobs', type=int, help='Worker processes for the benchmark')
    parser.add_argument('--log-level', default=None, help='Logging level (default INFO)')
    sub = parser.add_subparsers(dest='command', required=True)

    p_sim = sub.add_parser('simulate', help='Write simulated event-time files')
    p_sim.add_argument('--horizons', type=float, nargs='+', help='Observation lengths T')
    p_sim.add_argument('--n-sim', type=int, help='Patterns per horizon')
    p_sim.add_argument('--mu', type=float)
    p_sim.add_argument('--alpha', type=float)
    p_sim.add_argument('--beta', type=float)

    p_est = sub.add_parser('estimate', help='Fit one estimator to an event-time file')
    p_est.add_argument('events', help="Event-time file with a '# window <start> <end>' header")
    p_est.add_argument('--estimator', default='SLS', help='SLS, SP, SL, OLS or ML')
    p_est.add_argument('--mode', default='none', help='none, pthin or loocv')
    p_est.add_argument('--p', type=float, help='Fix the thinning probability and tune only kappa')
    p_est.add_argument('--half-width', type=float, help='Frequency half-width A')
    p_est.add_argument('--report', help='Write the fit as JSON')

    p_bench = sub.add_parser('benchmark', help='Run the Monte Carlo study')
    p_bench.add_argument('--horizons', type=float, nargs='+')
    p_bench.add_argument('--n-sim', type=int)
    p_bench.add_argument('--estimators', help="Selection such as 'SLS:none+pthin,ML'")
    p_bench.add_argument('--p', type=float, help='Fix the thinning probability and tune only kappa')
    p_bench.add_argument('--confirm', action='store_true', help='Ask before running')
    p_bench.add_argument('--no-plots', action='store_true')
    p_bench.add_argument('--quiet', action='store_true', help='No progress bar')

    p_plot = sub.add_parser('plot', help='Draw MSE curves and selection histograms from summary.csv')
    p_plot.add_argument('summary')
    p_plot.add_argument('--selections', help='selections.csv (defaults to the one next to summary)')
    return parser


COMMANDS = {'simulate': cmd_simulate, 'estimate': cmd_estimate, 'benchmark': cmd_benchmark, 'plot': cmd_plot}


def main(argv=None) -> int:
    load_dotenv()  # load .env if present

    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or os.environ.get("HAWKSPEC_LOG_LEVEL") or "INFO")
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config)
    except (ConfigError, DomainError, EstimationFailure) as exc:
        logger.error("%s", exc)
        return EXIT_USAGE


if __name__ == '__main__':
    raise SystemExit(main())
