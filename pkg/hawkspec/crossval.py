"""Penalty selection: p-thinning cross-validation and block leave-one-out.

Every estimate is reported as the full vector (mu, alpha, beta); spectral
fits recover mu from the plug-in intensity.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple
import logging

import numpy as np

from hawkspec.contrasts import (
    ContrastKind,
    Objective,
    build_objective,
    spectral_objective,
)
from hawkspec.core import (
    CrossValidationFailure,
    DomainError,
    EstimationFailure,
    PointPattern,
    RngStream,
    ThinningSplit,
    concatenate_blocks,
    equal_blocks,
    rebase,
    restrict,
    thin,
)
from hawkspec.optimize import FeasibleRegion, fit_objective
from hawkspec.spectral import FrequencyGrid, fourier_grid, periodogram, rescale_test, rescale_train

logger = logging.getLogger(__name__)

DEFAULT_P_VALUES = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
DEFAULT_KAPPAS = tuple(2.0 ** e for e in range(-14, 4))
DEFAULT_THINNINGS = 10
DEFAULT_LOOCV_BLOCKS = 4


@dataclass(frozen=True)
class CvGrid:
    p_values: Tuple[float, ...] = DEFAULT_P_VALUES
    kappa_values: Tuple[float, ...] = DEFAULT_KAPPAS
    n_thinnings: int = DEFAULT_THINNINGS

    def __post_init__(self):
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        object.__setattr__(self, "kappa_values", tuple(float(k) for k in self.kappa_values))
        if not self.p_values or not self.kappa_values:
            raise DomainError("cross-validation grids must not be empty")
        if any(not 0 < p < 1 for p in self.p_values):
            raise DomainError(f"thinning probabilities must lie in (0, 1), got {self.p_values}")
        if any(k < 0 for k in self.kappa_values):
            raise DomainError(f"ridge weights must be non-negative, got {self.kappa_values}")
        if self.n_thinnings < 1:
            raise DomainError(f"need at least one thinning, got {self.n_thinnings}")


@dataclass(frozen=True, eq=False)
class Estimate:
    theta: np.ndarray
    converged: bool
    objective_value: float


@dataclass(frozen=True, eq=False)
class CvReport:
    """Outcome of a cross-validated fit.

    ``errors`` and ``estimates`` are indexed (p, kappa, split); NaN marks a
    cell whose fit or score failed. Block LOOCV has a single ``None`` p row
    and one split per fold.
    """
    method: ContrastKind
    p_values: Tuple[Optional[float], ...]
    kappa_values: Tuple[float, ...]
    errors: np.ndarray
    estimates: np.ndarray
    converged: np.ndarray
    selected: Tuple[int, int]
    final_estimate: np.ndarray
    final_converged: bool

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.errors)

    @property
    def mean_errors(self) -> np.ndarray:
        return _valid_mean(self.errors)

    @property
    def selected_p(self) -> Optional[float]:
        return self.p_values[self.selected[0]]

    @property
    def selected_kappa(self) -> float:
        return self.kappa_values[self.selected[1]]

    @property
    def per_thinning_estimates(self) -> np.ndarray:
        ip, ik = self.selected
        return self.estimates[ip, ik][self.valid[ip, ik]]


def _valid_mean(errors: np.ndarray) -> np.ndarray:
    valid = np.isfinite(errors)
    counts = valid.sum(axis=-1)
    totals = np.where(valid, errors, 0.0).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, totals / np.maximum(counts, 1), np.nan)


def select_cell(mean_errors: np.ndarray, kappa_values: Sequence[float],
                p_values: Optional[Sequence[float]] = None) -> Tuple[int, int]:
    """argmin over (p, kappa); exact ties go to the smallest kappa, then the smallest p."""
    p_order = range(mean_errors.shape[0]) if p_values is None else np.argsort(p_values, kind="stable")
    best = None
    for ik in np.argsort(kappa_values, kind="stable"):
        for ip in p_order:
            value = mean_errors[ip, ik]
            if np.isfinite(value) and (best is None or value < best[0]):
                best = (value, int(ip), int(ik))
    if best is None:
        raise CrossValidationFailure("every cross-validation cell failed")
    return best[1], best[2]


def estimate(pattern: PointPattern, method: ContrastKind, kappa: float, freq_grid: Optional[FrequencyGrid],
             rng: RngStream, region: Optional[FeasibleRegion] = None) -> Estimate:
    """Ridge fit of one method on the whole pattern; kappa = 0 is the plain estimator."""
    objective = build_objective(method, pattern, freq_grid, kappa)
    result = fit_objective(objective, rng, region)
    return Estimate(objective.full_theta(result.theta_hat), result.converged, result.objective_value)


def cell_split(pattern: PointPattern, p: float, rng: RngStream, j: int, ip: int) -> ThinningSplit:
    """The j-th thinning at the ip-th p; shared by every kappa of that row."""
    return thin(pattern, p, rng.derive("thin", j, ip))


def thinned_objectives(method: ContrastKind, split: ThinningSplit, freq_grid: FrequencyGrid,
                       m_hat: float) -> Tuple[Objective, Objective]:
    """(train, test) objectives of a split, both on the scale of the unthinned process."""
    p = split.p
    raw_train = periodogram(split.retained, freq_grid, p * m_hat)
    raw_test = periodogram(split.rejected, freq_grid, (1.0 - p) * m_hat)
    if method is ContrastKind.SL:
        return (spectral_objective(method, raw_train, m_hat, thinning_scale=p),
                spectral_objective(method, raw_test, m_hat, thinning_scale=1.0 - p))
    return (spectral_objective(method, rescale_train(raw_train, p, m_hat), m_hat),
            spectral_objective(method, rescale_test(raw_test, p, m_hat), m_hat))


def pthin_cv(pattern: PointPattern, method: ContrastKind, grid: CvGrid, freq_grid: FrequencyGrid,
             rng: RngStream, region: Optional[FeasibleRegion] = None) -> CvReport:
    """Select (p, kappa) by repeated p-thinning and average the fits of the chosen cell."""
    if not method.is_spectral:
        raise DomainError(f"p-thinning cross-validation needs a spectral method, got {method.value}")
    if not pattern.count():
        raise EstimationFailure("cannot cross-validate an empty pattern")
    m_hat = pattern.rate()
    n_p, n_k, n = len(grid.p_values), len(grid.kappa_values), grid.n_thinnings
    errors = np.full((n_p, n_k, n), np.nan)
    estimates = np.full((n_p, n_k, n, 3), np.nan)
    converged = np.zeros((n_p, n_k, n), dtype=bool)

    for j in range(n):
        for ip, p in enumerate(grid.p_values):
            split = cell_split(pattern, p, rng, j, ip)
            train, test = thinned_objectives(method, split, freq_grid, m_hat)
            for ik, kappa in enumerate(grid.kappa_values):
                try:
                    result = fit_objective(train.with_kappa(kappa), rng.derive("fit", j, ip, ik), region)
                    err = test(result.theta_hat)
                except EstimationFailure as exc:
                    logger.debug("cell p=%g kappa=%g split=%d failed: %s", p, kappa, j, exc)
                    continue
                if not np.isfinite(err):
                    continue
                errors[ip, ik, j] = err
                estimates[ip, ik, j] = train.full_theta(result.theta_hat)
                converged[ip, ik, j] = result.converged

    ip, ik = select_cell(_valid_mean(errors), grid.kappa_values, grid.p_values)
    keep = np.isfinite(errors[ip, ik])
    final = estimates[ip, ik][keep].mean(axis=0)
    logger.debug("%s p-thinning selected p=%g kappa=%g from %d valid splits",
                 method.value, grid.p_values[ip], grid.kappa_values[ik], int(keep.sum()))
    return CvReport(method, grid.p_values, grid.kappa_values, errors, estimates, converged,
                    (ip, ik), final, bool(converged[ip, ik][keep].all()))


def _block_objective(method: ContrastKind, pattern: PointPattern, half_width: float) -> Objective:
    grid = fourier_grid(pattern.window.length(), half_width) if method.is_spectral else None
    return build_objective(method, pattern, grid)


def block_loocv(pattern: PointPattern, method: ContrastKind, kappas: Sequence[float],
                k: int, freq_grid: Optional[FrequencyGrid], rng: RngStream,
                region: Optional[FeasibleRegion] = None) -> CvReport:
    """Leave one of k contiguous blocks out, fit on the glued remainder, score on the block.

    Each block is scored with the method's own unpenalised objective; the
    selected kappa is then refitted on the whole pattern. Spectral methods use
    the Fourier grid of each sub-window with the half-width of ``freq_grid``.
    """
    kappas = tuple(float(x) for x in kappas)
    if not kappas or any(x < 0 for x in kappas):
        raise DomainError(f"need a non-empty grid of non-negative ridge weights, got {kappas}")
    if method.is_spectral and freq_grid is None:
        raise DomainError(f"{method.value} needs a frequency grid")
    half_width = freq_grid.half_width if freq_grid is not None else None
    blocks = equal_blocks(pattern.window, k)
    if method.is_spectral:
        try:
            fourier_grid(min(b.length() for b in blocks), half_width)
        except DomainError as exc:
            raise CrossValidationFailure(f"{k} blocks are too short for a spectral fit: {exc}") from exc
    errors = np.full((1, len(kappas), k), np.nan)
    estimates = np.full((1, len(kappas), k, 3), np.nan)
    converged = np.zeros((1, len(kappas), k), dtype=bool)

    for i, block in enumerate(blocks):
        try:
            train = _block_objective(method, concatenate_blocks(pattern, block), half_width)
            test = _block_objective(method, rebase(restrict(pattern, block)), half_width)
        except EstimationFailure as exc:
            logger.debug("fold %d skipped: %s", i, exc)
            continue
        for ik, kappa in enumerate(kappas):
            try:
                result = fit_objective(train.with_kappa(kappa), rng.derive("loocv", i, ik), region)
                err = test(result.theta_hat)
            except EstimationFailure as exc:
                logger.debug("fold %d kappa=%g failed: %s", i, kappa, exc)
                continue
            if not np.isfinite(err):
                continue
            errors[0, ik, i] = err
            estimates[0, ik, i] = train.full_theta(result.theta_hat)
            converged[0, ik, i] = result.converged

    _, ik = select_cell(_valid_mean(errors), kappas)
    final = estimate(pattern, method, kappas[ik], freq_grid, rng.derive("final"), region)
    return CvReport(method, (None,), kappas, errors, estimates, converged, (0, ik),
                    final.theta, final.converged)
