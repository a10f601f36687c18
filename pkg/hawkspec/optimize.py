"""Bounded Nelder-Mead minimisation through coordinate transforms, with restarts."""
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy import optimize as sopt
from scipy.special import expit, logit

from hawkspec.core import DomainError, EstimationFailure, RngStream

logger = logging.getLogger(__name__)

MAX_ITER = 500
SIMPLEX_TOL = 1e-8
TIE_TOL = 1e-12

DEFAULT_ALPHA_BETA_STARTS = ((0.3, 1.0), (0.5, 2.0), (0.7, 5.0))
DEFAULT_MU_FACTORS = (0.5, 1.0)


@dataclass(frozen=True)
class FeasibleRegion:
    """Box for (alpha, beta), optionally preceded by mu.

    alpha moves on a logit scale over its bounds, beta and mu on a log scale
    clipped to their bounds.
    """
    alpha_bounds: Tuple[float, float] = (1e-4, 1.0 - 1e-4)
    beta_bounds: Tuple[float, float] = (1e-4, 50.0)
    mu_bounds: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        for name, (lo, hi) in self._named_bounds():
            if not lo < hi:
                raise DomainError(f"{name} bounds must be strictly ordered, got ({lo}, {hi})")
        lo, hi = self.alpha_bounds
        if lo <= 0 or hi >= 1:
            raise DomainError("alpha bounds must stay inside (0, 1)")
        if self.beta_bounds[0] <= 0 or (self.mu_bounds and self.mu_bounds[0] <= 0):
            raise DomainError("beta and mu bounds must be positive")

    @classmethod
    def default(cls, free_mu: bool = False) -> "FeasibleRegion":
        return cls(mu_bounds=(1e-6, 100.0) if free_mu else None)

    def _named_bounds(self):
        named = [("alpha", self.alpha_bounds), ("beta", self.beta_bounds)]
        if self.mu_bounds is not None:
            named.insert(0, ("mu", self.mu_bounds))
        return named

    @property
    def free_mu(self) -> bool:
        return self.mu_bounds is not None

    @property
    def n_params(self) -> int:
        return 3 if self.free_mu else 2

    def bounds(self) -> List[Tuple[float, float]]:
        return [b for _, b in self._named_bounds()]

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            return False
        return all(lo <= x <= hi for x, (lo, hi) in zip(theta, self.bounds()))

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        z = np.log(theta)
        lo, hi = self.alpha_bounds
        ia = self.n_params - 2
        z[ia] = logit((theta[ia] - lo) / (hi - lo))
        return z

    def from_unconstrained(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        theta = np.exp(z)
        lo, hi = self.alpha_bounds
        ia = self.n_params - 2
        theta[ia] = lo + (hi - lo) * expit(z[ia])
        for i, (blo, bhi) in enumerate(self.bounds()):
            theta[i] = min(max(theta[i], blo), bhi)
        return theta


@dataclass(frozen=True, eq=False)
class OptimResult:
    theta_hat: np.ndarray
    objective_value: float
    converged: bool
    iterations: int
    restarts_used: int
    best_start: int = 0


def default_starts(region: FeasibleRegion, m_hat: Optional[float] = None) -> List[np.ndarray]:
    """(alpha, beta) in {(0.3, 1), (0.5, 2), (0.7, 5)}, crossed with mu in {m_hat/2, m_hat} when mu is free."""
    starts = []
    for alpha, beta in DEFAULT_ALPHA_BETA_STARTS:
        if not region.free_mu:
            starts.append(np.array([alpha, beta]))
            continue
        if m_hat is None:
            raise DomainError("mu starts need the plug-in intensity m_hat")
        lo, hi = region.mu_bounds
        for factor in DEFAULT_MU_FACTORS:
            starts.append(np.array([min(max(factor * m_hat, lo), hi), alpha, beta]))
    return [region.from_unconstrained(region.to_unconstrained(s)) for s in starts]


def _random_starts(region: FeasibleRegion, rng: RngStream, n: int) -> List[np.ndarray]:
    gen = rng.generator()
    lows, highs = np.array(region.bounds()).T
    return [lows + (highs - lows) * gen.random(region.n_params) for _ in range(n)]


def minimize(objective: Callable, region: FeasibleRegion, starts: Sequence, rng: Optional[RngStream] = None,
             n_random_starts: int = 0, max_iter: int = MAX_ITER, xatol: float = SIMPLEX_TOL) -> OptimResult:
    """Run Nelder-Mead from every start in transformed coordinates and keep the best end point.

    Ties within 1e-12 go to the earliest start. ``n_random_starts`` extra
    starts are drawn uniformly in the box from ``rng``.
    """
    starts = [np.asarray(s, dtype=np.float64) for s in starts]
    if n_random_starts:
        if rng is None:
            raise DomainError("random starts need an RngStream")
        starts += _random_starts(region, rng, n_random_starts)
    if not starts:
        raise DomainError("need at least one start point")
    for s in starts:
        if not region.contains(s):
            raise DomainError(f"start {s} lies outside the feasible region")

    def transformed(z):
        value = objective(region.from_unconstrained(z))
        return value if np.isfinite(value) else np.inf

    best = None
    n = region.n_params
    with np.errstate(all="ignore"):
        for i, start in enumerate(starts):
            res = sopt.minimize(transformed, region.to_unconstrained(start), method="Nelder-Mead",
                                options={"maxiter": max_iter, "maxfev": 4 * max_iter * (n + 1),
                                         "xatol": xatol, "fatol": np.inf})
            theta = region.from_unconstrained(res.x)
            value = float(objective(theta))
            start_value = float(objective(start))
            if np.isfinite(start_value) and not start_value >= value:
                theta, value = start.copy(), start_value
            logger.debug("start %d %s -> %s value=%.6g nit=%d status=%d",
                         i, np.round(start, 4), np.round(theta, 4), value, res.nit, res.status)
            if not np.isfinite(value):
                continue
            if best is None or value < best[1] - TIE_TOL:
                best = (theta, value, res.status == 0, int(res.nit), i)

    if best is None:
        raise EstimationFailure("objective is not finite from any start")
    theta, value, converged, nit, index = best
    return OptimResult(theta, value, converged, nit, len(starts), index)


def fit_objective(objective, rng: Optional[RngStream] = None, region: Optional[FeasibleRegion] = None,
                  starts: Optional[Sequence] = None) -> OptimResult:
    """minimize with the default region and starts for the objective's parameter count."""
    if region is None:
        region = FeasibleRegion.default(free_mu=objective.n_params == 3)
    if starts is None:
        starts = default_starts(region, objective.m_hat)
    return minimize(objective, region, starts, rng)
