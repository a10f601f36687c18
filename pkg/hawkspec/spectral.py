"""Frequency grids, centered periodograms of point patterns and their thinning rescalings."""
from dataclasses import dataclass
from enum import Enum
from typing import Optional
import logging
import math

import numpy as np

from hawkspec.core import DomainError, PointPattern

logger = logging.getLogger(__name__)

# events per block of the direct sum; bounds the (frequencies x events) phase matrix
_DIRECT_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Symmetric grid of Fourier frequencies j/T over D = [-A, A] without nu = 0.

    Each frequency owns a cell of width ``spacing`` centred on it, clipped to
    D; the central cell around 0 is left out, so the weights add up to
    |D| - spacing.
    """
    frequencies: np.ndarray
    weights: np.ndarray
    half_width: float
    spacing: float

    def __len__(self):
        return int(len(self.frequencies))

    @property
    def n_positive(self) -> int:
        return len(self) // 2

    def measure(self) -> float:
        return float(np.sum(self.weights))


class PeriodogramKind(Enum):
    RAW = "raw"
    RESCALED_TRAIN = "rescaled-train"
    RESCALED_TEST = "rescaled-test"


@dataclass(frozen=True, eq=False)
class Periodogram:
    """Periodogram values on a grid.

    Rescaled kinds subtract p(1-p) m_hat before dividing, so their values may
    be negative; they are kept as they are.
    """
    grid: FrequencyGrid
    values: np.ndarray
    m_hat: float
    kind: PeriodogramKind = PeriodogramKind.RAW
    p: Optional[float] = None


def fourier_grid(T: float, A: float) -> FrequencyGrid:
    if not (T > 0 and A > 0):
        raise DomainError(f"horizon and half-width must be positive, got T={T}, A={A}")
    spacing = 1.0 / T
    # guard against A*T landing a hair under an integer
    j_max = int(math.floor(A * T * (1.0 + 1e-12)))
    if j_max < 1:
        raise DomainError(f"no Fourier frequency 1/T={spacing:g} fits inside [-{A:g}, {A:g}]")
    j = np.arange(1, j_max + 1, dtype=np.float64)
    positive = j * spacing
    w = np.full(j_max, spacing)
    w[-1] = min(spacing, A - positive[-1] + 0.5 * spacing)
    frequencies = np.concatenate([-positive[::-1], positive])
    weights = np.concatenate([w[::-1], w])
    frequencies.setflags(write=False)
    weights.setflags(write=False)
    return FrequencyGrid(frequencies, weights, float(A), spacing)


def _fourier_sums_direct(t: np.ndarray, nu: np.ndarray) -> np.ndarray:
    sums = np.zeros(len(nu), dtype=np.complex128)
    for lo in range(0, len(t), _DIRECT_CHUNK):
        chunk = t[lo:lo + _DIRECT_CHUNK]
        sums += np.exp(-2j * np.pi * np.outer(nu, chunk)).sum(axis=1)
    return sums


def _fourier_sums_recurrence(t: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    # nu_j = j * spacing, so exp(-2 pi i nu_j t) is the j-th power of one phasor per event
    half = grid.n_positive
    step = np.exp(-2j * np.pi * grid.spacing * t)
    phasor = step.copy()
    positive = np.empty(half, dtype=np.complex128)
    for j in range(half):
        positive[j] = phasor.sum()
        phasor *= step
    return np.concatenate([np.conj(positive[::-1]), positive])


def _is_regular(grid: FrequencyGrid) -> bool:
    half = grid.n_positive
    expected = grid.spacing * np.arange(1, half + 1)
    return len(grid) == 2 * half and np.allclose(grid.frequencies[half:], expected, rtol=1e-12, atol=0.0)


def centering_term(grid: FrequencyGrid, T: float, rate: float) -> np.ndarray:
    """rate * int_0^T exp(-2 pi i nu t) dt on every grid frequency; zero on Fourier frequencies of T."""
    nu = grid.frequencies
    return rate * (1.0 - np.exp(-2j * np.pi * nu * T)) / (2j * np.pi * nu)


def periodogram(pattern: PointPattern, grid: FrequencyGrid, centering_rate: float,
                method: str = "recurrence") -> Periodogram:
    """(1/T) |sum_k exp(-2 pi i nu t_k) - rate * int_0^T exp(-2 pi i nu t) dt|^2 on the grid.

    Times are taken relative to the window start. ``method="direct"`` is the
    reference summation; ``"recurrence"`` walks phasor powers and needs a
    regular grid.
    """
    if centering_rate < 0:
        raise DomainError(f"centering rate must be non-negative, got {centering_rate}")
    T = pattern.window.length()
    t = pattern.relative_times()
    if method == "direct":
        sums = _fourier_sums_direct(t, grid.frequencies)
    elif method == "recurrence":
        if not _is_regular(grid):
            raise DomainError("phasor recurrence needs frequencies j * spacing, j = 1..J")
        sums = _fourier_sums_recurrence(t, grid)
    else:
        raise DomainError(f"unknown periodogram method {method!r}")
    if centering_rate:
        sums = sums - centering_term(grid, T, centering_rate)
    values = np.abs(sums) ** 2 / T
    values.setflags(write=False)
    return Periodogram(grid, values, centering_rate, PeriodogramKind.RAW)


def _rescale(raw: Periodogram, p: float, m_hat: float, divisor: float, kind: PeriodogramKind) -> Periodogram:
    if raw.kind is not PeriodogramKind.RAW:
        raise DomainError(f"only raw periodograms can be rescaled, got {raw.kind.value}")
    if not 0.0 < p < 1.0:
        raise DomainError(f"thinning probability must lie in (0, 1), got {p}")
    values = (raw.values - p * (1.0 - p) * m_hat) / divisor
    values.setflags(write=False)
    return Periodogram(raw.grid, values, m_hat, kind, p)


def rescale_train(raw: Periodogram, p: float, m_hat: float) -> Periodogram:
    """Map the periodogram of the retained points back to the scale of the full process."""
    return _rescale(raw, p, m_hat, p * p, PeriodogramKind.RESCALED_TRAIN)


def rescale_test(raw: Periodogram, p: float, m_hat: float) -> Periodogram:
    """Same as rescale_train for the rejected points, which survive with probability 1 - p."""
    return _rescale(raw, p, m_hat, (1.0 - p) ** 2, PeriodogramKind.RESCALED_TEST)


def quadrature(grid: FrequencyGrid, values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != grid.weights.shape:
        raise DomainError(f"expected {len(grid)} values, got shape {values.shape}")
    return float(np.dot(grid.weights, values))
