"""Estimation objectives for the exponential Hawkes model.

Spectral kinds (SLS, SP, SL) work on a periodogram and fit theta = (alpha, beta)
with m fixed at its plug-in value; temporal kinds (OLS, ML) work on the event
times and fit theta = (mu, alpha, beta). Every objective can carry a ridge
penalty kappa * (alpha^2 + beta^2).
"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence
import logging

import numpy as np

from hawkspec.core import DomainError, EstimationFailure, PointPattern
from hawkspec.hawkes import (
    compensated_spectrum,
    compensator,
    conditional_intensity_at_events,
    excitation_state,
    mu_from_branching,
)
from hawkspec.spectral import FrequencyGrid, Periodogram, PeriodogramKind, periodogram, quadrature

logger = logging.getLogger(__name__)


class ContrastKind(Enum):
    SLS = "SLS"
    SP = "SP"
    SL = "SL"
    OLS = "OLS"
    ML = "ML"

    @property
    def is_spectral(self) -> bool:
        return self in (ContrastKind.SLS, ContrastKind.SP, ContrastKind.SL)


def _aligned(pg: Periodogram, grid: FrequencyGrid) -> np.ndarray:
    if pg.values.shape != grid.frequencies.shape:
        raise DomainError(f"periodogram has {pg.values.size} values for a grid of {len(grid)}")
    return pg.values


def sls_contrast(pg: Periodogram, grid: FrequencyGrid, m_hat: float, theta: Sequence[float]) -> float:
    """int f0^2 - 2 int f0 I + 2 m_hat int f0 over the grid."""
    alpha, beta = theta
    values = _aligned(pg, grid)
    f0 = compensated_spectrum(alpha, beta, m_hat, grid.frequencies)
    return quadrature(grid, f0 * (f0 - 2.0 * values + 2.0 * m_hat))


def sp_distance(pg: Periodogram, grid: FrequencyGrid, m_hat: float, theta: Sequence[float]) -> float:
    """Squared L2(D) distance between f0 and I - m_hat."""
    alpha, beta = theta
    values = _aligned(pg, grid)
    f0 = compensated_spectrum(alpha, beta, m_hat, grid.frequencies)
    resid = f0 - (values - m_hat)
    return quadrature(grid, resid * resid)


def whittle_nll(pg: Periodogram, grid: FrequencyGrid, m_hat: float, theta: Sequence[float],
                thinning_scale: Optional[float] = None) -> float:
    """Whittle negative log-likelihood sum w_j [log f(nu_j) + I(nu_j) / f(nu_j)].

    With ``thinning_scale=p`` the model is the spectrum of a p-thinning,
    p^2 f + p (1 - p) m_hat, matched against the raw thinned periodogram.
    """
    if pg.kind is not PeriodogramKind.RAW:
        raise DomainError("the Whittle objective needs a raw periodogram")
    if not m_hat > 0:
        raise EstimationFailure("Whittle objective undefined for an empty pattern (m_hat = 0)")
    alpha, beta = theta
    values = _aligned(pg, grid)
    f = m_hat + compensated_spectrum(alpha, beta, m_hat, grid.frequencies)
    if thinning_scale is not None:
        p = thinning_scale
        f = p * p * f + p * (1.0 - p) * m_hat
    return quadrature(grid, np.log(f) + values / f)


def ols_contrast(pattern: PointPattern, theta: Sequence[float]) -> float:
    """int_0^T lambda^2 dt - 2 sum_i lambda(t_i).

    Between events the excitation decays as c_i exp(-beta (t - t_i)), so
    int S and int S^2 have closed forms per interval.
    """
    mu, alpha, beta = theta
    T = pattern.window.length()
    t = pattern.relative_times()
    if not len(t):
        return mu * mu * T
    a = excitation_state(t, beta)
    lam = mu + alpha * beta * a
    c = a + 1.0
    gaps = np.diff(np.append(t, T))
    int_s = np.sum(c * -np.expm1(-beta * gaps)) / beta
    int_s2 = np.sum(c * c * -np.expm1(-2.0 * beta * gaps)) / (2.0 * beta)
    ab = alpha * beta
    integral = mu * mu * T + 2.0 * mu * ab * int_s + ab * ab * int_s2
    return float(integral - 2.0 * np.sum(lam))


def ml_nll(pattern: PointPattern, theta: Sequence[float]) -> float:
    """Negative log-likelihood -(sum log lambda(t_i) - Lambda(T))."""
    if not theta[0] > 0:
        raise DomainError(f"baseline intensity must be positive, got mu={theta[0]}")
    lam = conditional_intensity_at_events(theta, pattern)
    return float(compensator(theta, pattern) - np.sum(np.log(lam)))


def ridge(value: float, alpha: float, beta: float, kappa: float) -> float:
    if kappa < 0:
        raise DomainError(f"ridge weight must be non-negative, got {kappa}")
    return value + kappa * (alpha * alpha + beta * beta)


@dataclass(frozen=True, eq=False)
class Objective:
    """Data-bound objective, callable on a parameter vector.

    Spectral kinds take (alpha, beta), temporal kinds take (mu, alpha, beta).
    Only (alpha, beta) enter the ridge penalty.
    """
    kind: ContrastKind
    m_hat: float
    ridge_kappa: float = 0.0
    pg: Optional[Periodogram] = None
    pattern: Optional[PointPattern] = None
    thinning_scale: Optional[float] = None

    def __post_init__(self):
        if self.ridge_kappa < 0:
            raise DomainError(f"ridge weight must be non-negative, got {self.ridge_kappa}")
        if self.kind.is_spectral:
            if self.pg is None:
                raise DomainError(f"{self.kind.value} needs a periodogram")
            if self.thinning_scale is not None and self.kind is not ContrastKind.SL:
                raise DomainError("only the Whittle objective fits a thinned spectrum directly")
        else:
            if self.pattern is None:
                raise DomainError(f"{self.kind.value} needs the event times")
            if self.pattern.is_thinned:
                raise DomainError(f"{self.kind.value} is not available on thinned patterns: "
                                  "their conditional intensity is intractable")

    @property
    def n_params(self) -> int:
        return 2 if self.kind.is_spectral else 3

    def contrast(self, theta) -> float:
        """Unpenalised value."""
        kind = self.kind
        if kind is ContrastKind.SLS:
            return sls_contrast(self.pg, self.pg.grid, self.m_hat, theta)
        if kind is ContrastKind.SP:
            return sp_distance(self.pg, self.pg.grid, self.m_hat, theta)
        if kind is ContrastKind.SL:
            return whittle_nll(self.pg, self.pg.grid, self.m_hat, theta, self.thinning_scale)
        if kind is ContrastKind.OLS:
            return ols_contrast(self.pattern, theta)
        return ml_nll(self.pattern, theta)

    def evaluate(self, theta) -> float:
        """Penalised value; the plain contrast when ridge_kappa is 0."""
        value = self.contrast(theta)
        if not self.ridge_kappa:
            return value
        alpha, beta = theta[-2], theta[-1]
        return ridge(value, alpha, beta, self.ridge_kappa)

    def __call__(self, theta) -> float:
        return self.evaluate(theta)

    def with_kappa(self, kappa: float) -> "Objective":
        return replace(self, ridge_kappa=kappa)

    def full_theta(self, theta) -> np.ndarray:
        """(mu, alpha, beta); spectral fits recover mu = m_hat (1 - alpha)."""
        theta = np.asarray(theta, dtype=np.float64)
        if self.kind.is_spectral:
            alpha, beta = theta
            return np.array([mu_from_branching(self.m_hat, alpha), alpha, beta])
        return theta.copy()


def spectral_objective(kind: ContrastKind, pg: Periodogram, m_hat: float, kappa: float = 0.0,
                       thinning_scale: Optional[float] = None) -> Objective:
    if not kind.is_spectral:
        raise DomainError(f"{kind.value} is not a spectral objective")
    return Objective(kind, m_hat, kappa, pg=pg, thinning_scale=thinning_scale)


def temporal_objective(kind: ContrastKind, pattern: PointPattern, kappa: float = 0.0) -> Objective:
    if kind.is_spectral:
        raise DomainError(f"{kind.value} is not a temporal objective")
    return Objective(kind, pattern.rate(), kappa, pattern=pattern)


def build_objective(kind: ContrastKind, pattern: PointPattern, grid: Optional[FrequencyGrid],
                    kappa: float = 0.0) -> Objective:
    """Objective for an unthinned pattern, with m_hat = N_T / T."""
    if not pattern.count():
        raise EstimationFailure(f"cannot fit {kind.value} to an empty pattern")
    if not kind.is_spectral:
        return temporal_objective(kind, pattern, kappa)
    if grid is None:
        raise DomainError(f"{kind.value} needs a frequency grid")
    m_hat = pattern.rate()
    return spectral_objective(kind, periodogram(pattern, grid, m_hat), m_hat, kappa)
