"""Point patterns on observation windows, seeded random streams and p-thinning."""
from dataclasses import dataclass
from typing import Iterable, Tuple
import hashlib
import logging
import struct

import numpy as np

logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """A precondition on the inputs of an operation does not hold."""


class EstimationFailure(RuntimeError):
    """An estimator could not produce a finite estimate."""


class CrossValidationFailure(EstimationFailure):
    """Every cell of a cross-validation grid failed."""


@dataclass(frozen=True)
class ObservationWindow:
    """Half-open time interval [start, end)."""
    start: float
    end: float

    def __post_init__(self):
        if not (np.isfinite(self.start) and np.isfinite(self.end)):
            raise DomainError(f"window bounds must be finite, got [{self.start}, {self.end})")
        if not self.end > self.start:
            raise DomainError(f"window end must exceed start, got [{self.start}, {self.end})")

    def length(self) -> float:
        return self.end - self.start

    def contains(self, other: "ObservationWindow") -> bool:
        return self.start <= other.start and other.end <= self.end


def _strictly_increasing(times: np.ndarray) -> np.ndarray:
    # ties get pushed to the next representable float above their predecessor
    out = times.copy()
    bumped = 0
    for i in range(1, len(out)):
        if out[i] <= out[i - 1]:
            out[i] = np.nextafter(out[i - 1], np.inf)
            bumped += 1
    if bumped:
        logger.warning("perturbed %d tied event time(s) by one ulp", bumped)
    return out


@dataclass(frozen=True, eq=False)
class PointPattern:
    """Sorted event times observed on a window.

    ``retention`` is the probability with which each point of the original
    process survived into this pattern; it is 1.0 for unthinned data and
    multiplies under successive thinnings.
    """
    times: np.ndarray
    window: ObservationWindow
    retention: float = 1.0

    def __post_init__(self):
        times = np.sort(np.asarray(self.times, dtype=np.float64).ravel())
        if len(times) and np.any(np.diff(times) <= 0):
            times = _strictly_increasing(times)
        if len(times) and (times[0] < self.window.start or times[-1] >= self.window.end):
            raise DomainError("event times must lie inside the observation window")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    def count(self) -> int:
        return int(len(self.times))

    def rate(self) -> float:
        """Plug-in mean intensity N_T / T."""
        return self.count() / self.window.length()

    def relative_times(self) -> np.ndarray:
        return self.times - self.window.start

    @property
    def is_thinned(self) -> bool:
        return self.retention < 1.0


@dataclass(frozen=True)
class ThinningSplit:
    retained: PointPattern
    rejected: PointPattern
    p: float


@dataclass(frozen=True)
class RngStream:
    """Named, reproducible random stream.

    Identical ``(seed, stream_id)`` pairs always yield the same generator;
    child streams are derived by hashing labels into a fresh stream id.
    """
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed & (2 ** 64 - 1), spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))

    def derive(self, *labels) -> "RngStream":
        h = hashlib.blake2b(digest_size=8)
        h.update(struct.pack("<Q", self.stream_id))
        for label in labels:
            h.update(repr(label).encode("utf-8"))
            h.update(b"\x1f")
        return RngStream(self.seed, int.from_bytes(h.digest(), "little"))


def thin(pattern: PointPattern, p: float, rng: RngStream) -> ThinningSplit:
    """Keep each event independently with probability p.

    Retained points form the training pattern, the rest the testing pattern.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"thinning probability must lie in (0, 1), got {p}")
    keep = rng.generator().random(pattern.count()) < p
    retained = PointPattern(pattern.times[keep], pattern.window, pattern.retention * p)
    rejected = PointPattern(pattern.times[~keep], pattern.window, pattern.retention * (1.0 - p))
    return ThinningSplit(retained, rejected, p)


def restrict(pattern: PointPattern, window: ObservationWindow) -> PointPattern:
    t = pattern.times
    inside = (t >= window.start) & (t < window.end)
    return PointPattern(t[inside], window, pattern.retention)


def _below(times: np.ndarray, end: float) -> np.ndarray:
    # shifting can round a time onto the new right edge
    return np.minimum(times, np.nextafter(end, -np.inf))


def rebase(pattern: PointPattern, origin: float = 0.0) -> PointPattern:
    """Shift a pattern so its window starts at ``origin``."""
    shift = origin - pattern.window.start
    window = ObservationWindow(origin, origin + pattern.window.length())
    return PointPattern(_below(pattern.times + shift, window.end), window, pattern.retention)


def concatenate_blocks(pattern: PointPattern, removed: ObservationWindow) -> PointPattern:
    """Drop the events in ``removed`` and glue the remaining two blocks together.

    Events after the removed block move left by its length; the result lives
    on a window shortened by the same amount.
    """
    if not pattern.window.contains(removed):
        raise DomainError(f"removed block {removed} is not inside {pattern.window}")
    remaining = pattern.window.length() - removed.length()
    if remaining <= 0:
        raise DomainError("removing the whole window leaves an empty observation window")
    t = pattern.times
    before = t[t < removed.start]
    after = t[t >= removed.end] - removed.length()
    window = ObservationWindow(pattern.window.start, pattern.window.start + remaining)
    return PointPattern(_below(np.concatenate([before, after]), window.end), window, pattern.retention)


def equal_blocks(window: ObservationWindow, k: int) -> Tuple[ObservationWindow, ...]:
    """Partition a window into k contiguous blocks of equal length."""
    if k < 2:
        raise DomainError(f"need at least two blocks, got k={k}")
    edges = window.start + window.length() * np.arange(k + 1) / k
    edges[-1] = window.end
    return tuple(ObservationWindow(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:]))


def pattern_from_times(times: Iterable[float], end: float, start: float = 0.0) -> PointPattern:
    return PointPattern(np.asarray(list(times), dtype=np.float64), ObservationWindow(start, end))
