"""Monte Carlo study: simulate, run the estimator battery, aggregate MSE tables."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple
import asyncio
import logging
import math

import numpy as np
import pandas as pd
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

from hawkspec.core import DomainError
from hawkspec.executor import ReplicationRecord, run_replication
from hawkspec.persistence import ensure_output_dir, records_frame, save_report, write_records_csv, write_table
from hawkspec.planner import ExperimentConfig

logger = logging.getLogger(__name__)

PARAMETERS = ("mu", "alpha", "beta")
SUMMARY_COLUMNS = ("estimator", "mode", "T", "n_ok", "n_failed", "n_nonconverged",
                   "mse", "mse_mu", "mse_alpha", "mse_beta")
SELECTION_COLUMNS = ("estimator", "mode", "T", "p_hat", "log2_kappa", "count")
TIMING_COLUMNS = ("estimator", "mode", "T", "n", "mean_seconds", "median_seconds")

Replicate = Callable[[ExperimentConfig, float, int], List[ReplicationRecord]]


@dataclass(frozen=True)
class MseSummary:
    total: float
    per_parameter: Tuple[float, float, float]
    n: int


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    records: List[ReplicationRecord]
    summary: pd.DataFrame
    selections: pd.DataFrame
    timings: pd.DataFrame
    output_dir: Optional[Path] = None


def mse(records: Iterable[ReplicationRecord], theta_star: Sequence[float]) -> MseSummary:
    """Mean squared l2 error over the records that produced an estimate.

    Non-converged fits count; failed ones (NaN estimates) do not.
    """
    records = list(records)
    if not records:
        raise DomainError("MSE of an empty selection of records")
    ok = [r for r in records if not r.failed]
    if not ok:
        raise DomainError(f"all {len(records)} records failed; MSE undefined")
    sq = (np.array([r.theta for r in ok]) - np.asarray(theta_star, dtype=np.float64)) ** 2
    per = sq.mean(axis=0)
    return MseSummary(float(sq.sum(axis=1).mean()), tuple(float(x) for x in per), len(ok))


def _groups(records: Iterable[ReplicationRecord]) -> Dict[Tuple[str, str, float], List[ReplicationRecord]]:
    groups: Dict[Tuple[str, str, float], List[ReplicationRecord]] = {}
    for r in records:
        groups.setdefault((r.estimator, r.mode, r.T), []).append(r)
    return groups


def summarise(records: Sequence[ReplicationRecord], theta_star: Sequence[float]) -> pd.DataFrame:
    rows = []
    for (estimator, mode, T), group in _groups(records).items():
        n_failed = sum(r.failed for r in group)
        row = {"estimator": estimator, "mode": mode, "T": T, "n_ok": len(group) - n_failed,
               "n_failed": n_failed, "n_nonconverged": sum(not r.converged and not r.failed for r in group)}
        try:
            summary = mse(group, theta_star)
            row["mse"] = summary.total
            row.update({f"mse_{name}": v for name, v in zip(PARAMETERS, summary.per_parameter)})
        except DomainError:
            logger.warning("%s/%s at T=%g: every replication failed", estimator, mode, T)
            row.update({"mse": math.nan, **{f"mse_{name}": math.nan for name in PARAMETERS}})
        rows.append(row)
    return pd.DataFrame(rows, columns=list(SUMMARY_COLUMNS))


def selection_counts(records: Sequence[ReplicationRecord]) -> pd.DataFrame:
    """How often each (p_hat, log2 kappa_hat) was selected, per (estimator, mode, T)."""
    frame = records_frame(r for r in records if r.kappa_hat is not None and not r.failed)
    if frame.empty:
        return pd.DataFrame(columns=list(SELECTION_COLUMNS))
    with np.errstate(divide="ignore"):
        frame["log2_kappa"] = np.log2(frame["kappa_hat"])
    counts = (frame.groupby(["estimator", "mode", "T", "p_hat", "log2_kappa"], dropna=False, sort=False)
              .size().rename("count").reset_index())
    return counts.sort_values(["estimator", "mode", "T", "p_hat", "log2_kappa"], kind="stable",
                              na_position="first").reset_index(drop=True)


def timing_table(records: Sequence[ReplicationRecord]) -> pd.DataFrame:
    frame = records_frame(records)
    if frame.empty:
        return pd.DataFrame(columns=list(TIMING_COLUMNS))
    grouped = frame.groupby(["estimator", "mode", "T"], sort=False)["seconds"]
    table = grouped.agg(n="size", mean_seconds="mean", median_seconds="median").reset_index()
    return table[list(TIMING_COLUMNS)]


def _task_order(config: ExperimentConfig) -> Dict[Tuple[str, str], int]:
    return {(t.estimator.value, t.mode.value): t.id for t in config.estimators}


def _sorted(records: List[ReplicationRecord], config: ExperimentConfig) -> List[ReplicationRecord]:
    order = _task_order(config)
    return sorted(records, key=lambda r: (r.T, r.rep, order.get((r.estimator, r.mode), 0)))


async def _run_all(config: ExperimentConfig, replicate: Replicate, on_done: Callable[[], None]):
    units = [(float(T), rep) for T in config.horizons for rep in range(config.n_sim)]
    records: List[ReplicationRecord] = []
    if config.jobs == 1:
        for T, rep in units:
            records.extend(replicate(config, T, rep))
            on_done()
        return records
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=config.jobs) as pool:
        futures = [loop.run_in_executor(pool, replicate, config, T, rep) for T, rep in units]
        for done in asyncio.as_completed(futures):
            records.extend(await done)
            on_done()
    return records


def collect_records(config: ExperimentConfig, progress: bool = False,
                    replicate: Replicate = run_replication) -> List[ReplicationRecord]:
    """Every (T, replication) unit, across ``config.jobs`` worker processes, in a fixed order."""
    total = len(config.horizons) * config.n_sim
    columns = (TextColumn("[bold]replications"), BarColumn(), MofNCompleteColumn(), TimeElapsedColumn())
    with Progress(*columns, disable=not progress, transient=True) as bar:
        task = bar.add_task("run", total=total)
        records = asyncio.run(_run_all(config, replicate, lambda: bar.advance(task)))
    return _sorted(records, config)


def write_outputs(result: ExperimentResult, config: ExperimentConfig, out: Path) -> None:
    write_records_csv(result.records, out / "records.csv")
    write_table(result.summary, out / "summary.csv")
    write_table(result.selections, out / "selections.csv")
    write_table(result.timings, out / "timings.csv")
    save_report(config.to_mapping(), out / "config.json")


def run_experiment(config: ExperimentConfig, progress: bool = False, write: bool = True,
                   replicate: Replicate = run_replication) -> ExperimentResult:
    """Run the whole study and write records.csv, summary.csv, selections.csv and timings.csv.

    ``replicate`` must be a module-level function when ``config.jobs > 1``.
    """
    out = ensure_output_dir(config.output_dir) if write else None
    if not config.estimators:
        logger.warning("no estimators selected; nothing to run")
    logger.info("running %d replications x %d horizons x %d tasks (seed=%d, jobs=%d)",
                config.n_sim, len(config.horizons), len(config.estimators), config.seed, config.jobs)
    records = collect_records(config, progress, replicate) if config.estimators else []
    failed = sum(r.failed for r in records)
    if failed:
        logger.warning("%d of %d records failed and are left out of the MSE", failed, len(records))
    result = ExperimentResult(records, summarise(records, config.theta_star),
                              selection_counts(records), timing_table(records), out)
    if out is not None:
        write_outputs(result, config, out)
        logger.info("results written to %s", out)
    return result
