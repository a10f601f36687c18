"""Univariate Hawkes process with exponential reproduction kernel h(t) = alpha*beta*exp(-beta*t)."""
from dataclasses import dataclass
from typing import Sequence, Tuple, Union
import logging

import numpy as np

from hawkspec.core import (
    DomainError,
    ObservationWindow,
    PointPattern,
    RngStream,
    restrict,
)

logger = logging.getLogger(__name__)

DEFAULT_BURN_IN = 100.0


@dataclass(frozen=True)
class HawkesParams:
    mu: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"baseline intensity must be positive, got mu={self.mu}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"branching ratio must lie in (0, 1), got alpha={self.alpha}")
        if not self.beta > 0:
            raise DomainError(f"decay rate must be positive, got beta={self.beta}")

    def stationary_intensity(self) -> float:
        return self.mu / (1.0 - self.alpha)

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.alpha, self.beta], dtype=np.float64)


def simulate(params: HawkesParams, window: ObservationWindow, burn_in: float = DEFAULT_BURN_IN,
             rng: RngStream = RngStream(0)) -> PointPattern:
    """Draw a realisation through the cluster (branching) representation.

    Immigrants arrive as a Poisson process of rate mu on
    [window.start - burn_in, window.end); each point begins Poisson(alpha)
    children after Exp(beta) delays, generation by generation. Children landing
    past window.end are dropped together with their descendants, which can
    only fall later still.
    """
    if burn_in < 0:
        raise DomainError(f"burn-in must be non-negative, got {burn_in}")
    gen = rng.generator()
    origin = window.start - burn_in
    span = window.end - origin

    generation = origin + span * gen.random(gen.poisson(params.mu * span))
    events = [generation]
    n_generations = 0
    while generation.size:
        n_children = gen.poisson(params.alpha, size=generation.size)
        parents = np.repeat(generation, n_children)
        children = parents + gen.exponential(1.0 / params.beta, size=parents.size)
        generation = children[children < window.end]
        events.append(generation)
        n_generations += 1

    full = PointPattern(np.concatenate(events), ObservationWindow(origin, window.end))
    logger.debug("simulated %d events over %d generations on [%g, %g)",
                 full.count(), n_generations, origin, window.end)
    return restrict(full, window)


Theta = Union["HawkesParams", Sequence[float]]


def _unpack(params: Theta) -> Tuple[float, float, float]:
    # raw vectors are taken as given, alpha = 0 included
    if isinstance(params, HawkesParams):
        return params.mu, params.alpha, params.beta
    mu, alpha, beta = (float(x) for x in params)
    return mu, alpha, beta


def excitation_state(times: np.ndarray, beta: float) -> np.ndarray:
    """A_i = sum_{j<i} exp(-beta (t_i - t_j)) via A_i = e^{-beta gap} (1 + A_{i-1})."""
    a = np.zeros(len(times), dtype=np.float64)
    if len(times) > 1:
        decay = np.exp(-beta * np.diff(times))
        prev = 0.0
        for i in range(1, len(times)):
            prev = decay[i - 1] * (1.0 + prev)
            a[i] = prev
    return a


def conditional_intensity_at_events(params: Theta, pattern: PointPattern) -> np.ndarray:
    """lambda(t_i) for every event, in linear time.

    History before the window is not visible, so the first event only sees mu.
    """
    mu, alpha, beta = _unpack(params)
    return mu + alpha * beta * excitation_state(pattern.times, beta)


def compensator(params: Theta, pattern: PointPattern) -> float:
    """Integrated intensity over the whole window, closed form."""
    mu, alpha, beta = _unpack(params)
    remaining = pattern.window.end - pattern.times
    return float(mu * pattern.window.length() + alpha * np.sum(-np.expm1(-beta * remaining)))


def compensator_at_events(params: Theta, pattern: PointPattern) -> np.ndarray:
    """Lambda(t_i) measured from the window start."""
    mu, alpha, beta = _unpack(params)
    a = excitation_state(pattern.times, beta)
    n_prior = np.arange(pattern.count(), dtype=np.float64)
    return mu * pattern.relative_times() + alpha * (n_prior - a)


def time_rescaled_gaps(params: HawkesParams, pattern: PointPattern) -> np.ndarray:
    """Residual inter-arrival times; i.i.d. Exp(1) when the model is right."""
    return np.diff(compensator_at_events(params, pattern), prepend=0.0)


def compensated_spectrum(alpha, beta, m, nu):
    """f0(nu) = f(nu) - m for the exponential kernel, vectorised over nu."""
    nu = np.asarray(nu, dtype=np.float64)
    b2 = beta * beta
    return m * b2 * alpha * (2.0 - alpha) / (b2 * (1.0 - alpha) ** 2 + 4.0 * np.pi ** 2 * nu ** 2)


def spectral_density(params: HawkesParams, m: float, nu):
    """Bartlett spectral density m * (1 + beta^2 alpha (2 - alpha) / (beta^2 (1-alpha)^2 + 4 pi^2 nu^2))."""
    return m + compensated_spectrum(params.alpha, params.beta, m, nu)


def mu_from_branching(m_hat: float, alpha: float) -> float:
    if m_hat < 0:
        raise DomainError(f"mean intensity must be non-negative, got {m_hat}")
    return m_hat * (1.0 - alpha)
