"""Ridge-penalised spectral estimation for point processes, with p-thinning cross-validation."""
from hawkspec.core import (
    CrossValidationFailure,
    DomainError,
    EstimationFailure,
    ObservationWindow,
    PointPattern,
    RngStream,
)
from hawkspec.hawkes import HawkesParams, simulate

__all__ = [
    "CrossValidationFailure",
    "DomainError",
    "EstimationFailure",
    "HawkesParams",
    "ObservationWindow",
    "PointPattern",
    "RngStream",
    "simulate",
]
