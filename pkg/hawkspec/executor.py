"""Carry out estimator tasks on one simulated replication."""
from dataclasses import dataclass
from typing import List, Optional, Tuple
import logging
import math
import time

import numpy as np

from hawkspec.core import EstimationFailure, ObservationWindow, PointPattern, RngStream
from hawkspec.crossval import CvReport, block_loocv, estimate, pthin_cv
from hawkspec.hawkes import simulate
from hawkspec.optimize import FeasibleRegion
from hawkspec.planner import EstimatorTask, ExperimentConfig, PenaltyMode
from hawkspec.spectral import FrequencyGrid, fourier_grid

logger = logging.getLogger(__name__)

CSV_FIELDS = ("rep", "T", "estimator", "mode", "mu_hat", "alpha_hat", "beta_hat",
              "p_hat", "kappa_hat", "seconds", "converged")


@dataclass(frozen=True)
class ReplicationRecord:
    """One estimator run on one replication; a failed fit has NaN estimates."""
    rep: int
    T: float
    estimator: str
    mode: str
    mu_hat: float
    alpha_hat: float
    beta_hat: float
    p_hat: Optional[float]
    kappa_hat: Optional[float]
    seconds: float
    converged: bool

    @property
    def failed(self) -> bool:
        return not all(math.isfinite(x) for x in self.theta)

    @property
    def theta(self) -> Tuple[float, float, float]:
        return (self.mu_hat, self.alpha_hat, self.beta_hat)


@dataclass(frozen=True, eq=False)
class TaskOutcome:
    theta: np.ndarray
    converged: bool
    report: Optional[CvReport] = None


def fit_task(task: EstimatorTask, pattern: PointPattern, freq_grid: FrequencyGrid,
             config: ExperimentConfig, rng: RngStream) -> TaskOutcome:
    kind = task.estimator
    if task.mode is PenaltyMode.NONE:
        est = estimate(pattern, kind, 0.0, freq_grid, rng)
        return TaskOutcome(est.theta, est.converged)
    if task.mode is PenaltyMode.PTHIN:
        report = pthin_cv(pattern, kind, config.cv, freq_grid, rng)
    else:
        report = block_loocv(pattern, kind, config.kappas_for(kind), config.loocv_k, freq_grid, rng)
    return TaskOutcome(report.final_estimate, report.final_converged, report)


def _in_region(theta: np.ndarray) -> bool:
    # mu is only boxed for temporal fits; spectral ones derive it from m_hat
    mu, alpha, beta = theta
    return bool(np.isfinite(mu) and mu > 0) and FeasibleRegion.default().contains((alpha, beta))


def execute_task(task: EstimatorTask, pattern: PointPattern, freq_grid: FrequencyGrid,
                 config: ExperimentConfig, rng: RngStream, rep: int) -> ReplicationRecord:
    """Run one task and time it; estimation failures become a failed record."""
    started = time.perf_counter()
    p_hat = kappa_hat = None
    try:
        outcome = fit_task(task, pattern, freq_grid, config, rng)
        theta, converged = outcome.theta, outcome.converged
        if outcome.report is not None:
            p_hat, kappa_hat = outcome.report.selected_p, outcome.report.selected_kappa
        if not _in_region(theta):
            raise EstimationFailure(f"estimate {theta} left the feasible region")
    except EstimationFailure as exc:
        logger.warning("rep %d T=%g %s failed: %s", rep, pattern.window.length(), task.label, exc)
        theta, converged = np.full(3, np.nan), False
    seconds = time.perf_counter() - started
    mu, alpha, beta = (float(x) for x in theta)
    return ReplicationRecord(rep, float(pattern.window.length()), task.estimator.value, task.mode.value,
                             mu, alpha, beta, p_hat, kappa_hat, seconds, bool(converged))


def replication_stream(config: ExperimentConfig, T: float, rep: int) -> RngStream:
    return RngStream(config.seed).derive("replication", float(T), int(rep))


def simulate_replication(config: ExperimentConfig, T: float, rep: int) -> PointPattern:
    rng = replication_stream(config, T, rep).derive("simulate")
    return simulate(config.true_params, ObservationWindow(0.0, float(T)), config.burn_in, rng)


def run_replication(config: ExperimentConfig, T: float, rep: int) -> List[ReplicationRecord]:
    """Simulate once, then run every planned task on that pattern."""
    pattern = simulate_replication(config, T, rep)
    freq_grid = fourier_grid(float(T), config.half_width)
    base = replication_stream(config, T, rep)
    records = []
    for task in config.estimators:
        rng = base.derive("task", task.estimator.value, task.mode.value)
        records.append(execute_task(task, pattern, freq_grid, config, rng, rep))
    logger.debug("rep %d T=%g: %d events, %d tasks", rep, T, pattern.count(), len(records))
    return records
