"""Experiment configuration and the estimator battery it expands to."""
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
import logging

from hawkspec.contrasts import ContrastKind
from hawkspec.crossval import DEFAULT_KAPPAS, DEFAULT_LOOCV_BLOCKS, CvGrid
from hawkspec.hawkes import DEFAULT_BURN_IN, HawkesParams
from hawkspec.core import DomainError

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Malformed experiment configuration."""


class PenaltyMode(Enum):
    NONE = "none"
    PTHIN = "pthin"
    LOOCV = "loocv"


# which penalisation modes each estimator supports; thinned temporal fits do not exist
ALLOWED_MODES: Dict[ContrastKind, Tuple[PenaltyMode, ...]] = {
    ContrastKind.OLS: (PenaltyMode.NONE, PenaltyMode.LOOCV),
    ContrastKind.ML: (PenaltyMode.NONE, PenaltyMode.LOOCV),
    ContrastKind.SL: (PenaltyMode.NONE, PenaltyMode.PTHIN, PenaltyMode.LOOCV),
    ContrastKind.SLS: (PenaltyMode.NONE, PenaltyMode.PTHIN, PenaltyMode.LOOCV),
    ContrastKind.SP: (PenaltyMode.NONE, PenaltyMode.PTHIN, PenaltyMode.LOOCV),
}

ESTIMATOR_ORDER = (ContrastKind.OLS, ContrastKind.ML, ContrastKind.SL, ContrastKind.SLS, ContrastKind.SP)


def _log2_grid(lo: int, hi: int) -> Tuple[float, ...]:
    return tuple(2.0 ** e for e in range(lo, hi + 1))


# penalty grids scaled to the typical size of each objective
DEFAULT_LOOCV_KAPPAS: Dict[ContrastKind, Tuple[float, ...]] = {
    ContrastKind.SLS: DEFAULT_KAPPAS,
    ContrastKind.SP: DEFAULT_KAPPAS,
    ContrastKind.SL: DEFAULT_KAPPAS,
    ContrastKind.ML: _log2_grid(-10, 7),
    ContrastKind.OLS: _log2_grid(-6, 10),
}


@dataclass(frozen=True)
class EstimatorTask:
    id: int
    estimator: ContrastKind
    mode: PenaltyMode

    def __post_init__(self):
        if self.mode not in ALLOWED_MODES[self.estimator]:
            raise DomainError(f"{self.estimator.value} cannot be penalised with {self.mode.value}")

    @property
    def label(self) -> str:
        return f"{self.estimator.value}/{self.mode.value}"


def plan_battery(selection: Optional[Mapping[ContrastKind, Sequence[PenaltyMode]]] = None) -> List[EstimatorTask]:
    """Expand an estimator -> modes selection into ordered tasks; None means the full battery."""
    if selection is None:
        selection = ALLOWED_MODES
    unknown = set(selection) - set(ESTIMATOR_ORDER)
    if unknown:
        raise DomainError(f"unknown estimators {sorted(k.value for k in unknown)}")
    for kind, modes in selection.items():
        refused = [m.value for m in modes if m not in ALLOWED_MODES[kind]]
        if refused:
            raise DomainError(f"{kind.value} cannot be penalised with {', '.join(refused)}")
    tasks = []
    for kind in ESTIMATOR_ORDER:
        for mode in ALLOWED_MODES[kind]:
            if mode in selection.get(kind, ()):
                tasks.append(EstimatorTask(len(tasks) + 1, kind, mode))
    return tasks


def parse_estimators(text: str) -> Dict[ContrastKind, Tuple[PenaltyMode, ...]]:
    """Parse 'SLS:none+pthin,ML' into a selection; a bare name selects every allowed mode."""
    selection = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        name, _, modes = item.partition(":")
        try:
            kind = ContrastKind(name.strip().upper())
            chosen = (tuple(PenaltyMode(m.strip().lower()) for m in modes.split("+"))
                      if modes else ALLOWED_MODES[kind])
        except ValueError as exc:
            raise ConfigError(f"cannot parse estimator selection {item!r}: {exc}") from exc
        selection[kind] = chosen
    return selection


def tasks_to_dicts(tasks: List[EstimatorTask]):
    return [{"id": t.id, "estimator": t.estimator.value, "mode": t.mode.value} for t in tasks]


@dataclass(frozen=True)
class ExperimentConfig:
    true_params: HawkesParams = HawkesParams(1.0, 0.5, 2.0)
    horizons: Tuple[float, ...] = (50.0, 100.0, 200.0, 400.0)
    n_sim: int = 64
    burn_in: float = DEFAULT_BURN_IN
    half_width: float = 2.0
    estimators: Tuple[EstimatorTask, ...] = field(default_factory=lambda: tuple(plan_battery()))
    cv: CvGrid = CvGrid()
    loocv_k: int = DEFAULT_LOOCV_BLOCKS
    loocv_kappas: Tuple[Tuple[ContrastKind, Tuple[float, ...]], ...] = tuple(DEFAULT_LOOCV_KAPPAS.items())
    seed: int = 0
    output_dir: Path = Path("results")
    jobs: int = 1

    def __post_init__(self):
        if self.n_sim < 1:
            raise ConfigError(f"n_sim must be positive, got {self.n_sim}")
        if not self.horizons or any(T <= 0 for T in self.horizons):
            raise ConfigError(f"horizons must be positive, got {self.horizons}")
        if self.burn_in < 0 or self.half_width <= 0:
            raise ConfigError("burn_in must be non-negative and half_width positive")
        short = [T for T in self.horizons if T * self.half_width < 1.0]
        if short:
            raise ConfigError(f"horizons {short} hold no Fourier frequency inside [-{self.half_width:g}, "
                              f"{self.half_width:g}]; need T * half_width >= 1")
        if self.loocv_k < 2:
            raise ConfigError(f"LOOCV needs k >= 2, got {self.loocv_k}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be positive, got {self.jobs}")

    @property
    def theta_star(self) -> Tuple[float, float, float]:
        p = self.true_params
        return (p.mu, p.alpha, p.beta)

    def kappas_for(self, kind: ContrastKind) -> Tuple[float, ...]:
        return dict(self.loocv_kappas).get(kind, DEFAULT_LOOCV_KAPPAS[kind])

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        """Build from the nested sections of a config file; missing keys keep their defaults."""
        sections = {
            "truth": {"mu", "alpha", "beta"},
            "simulation": {"horizons", "n_sim", "burn_in"},
            "spectral": {"half_width"},
            "estimators": None,
            "pthin": {"p_values", "kappa_values", "n_thinnings"},
            "loocv": {"k", "kappas"},
            "run": {"seed", "output_dir", "jobs"},
        }
        unknown = set(data) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        for name, keys in sections.items():
            section = data.get(name, {})
            if not isinstance(section, Mapping):
                raise ConfigError(f"section {name!r} must be a mapping")
            if keys is not None and set(section) - keys:
                raise ConfigError(f"unknown keys in {name!r}: {sorted(set(section) - keys)}")

        base = cls()
        changes: Dict[str, Any] = {}
        try:
            truth = data.get("truth", {})
            if truth:
                p = base.true_params
                changes["true_params"] = HawkesParams(float(truth.get("mu", p.mu)),
                                                      float(truth.get("alpha", p.alpha)),
                                                      float(truth.get("beta", p.beta)))
            sim = data.get("simulation", {})
            if "horizons" in sim:
                changes["horizons"] = tuple(float(T) for T in sim["horizons"])
            if "n_sim" in sim:
                changes["n_sim"] = int(sim["n_sim"])
            if "burn_in" in sim:
                changes["burn_in"] = float(sim["burn_in"])
            if "half_width" in data.get("spectral", {}):
                changes["half_width"] = float(data["spectral"]["half_width"])
            if "estimators" in data:
                selection = {ContrastKind(k.upper()): tuple(PenaltyMode(m) for m in modes)
                             for k, modes in data["estimators"].items()}
                changes["estimators"] = tuple(plan_battery(selection))
            pthin = data.get("pthin", {})
            if pthin:
                changes["cv"] = CvGrid(
                    tuple(pthin.get("p_values", base.cv.p_values)),
                    _kappa_grid(pthin["kappa_values"]) if "kappa_values" in pthin else base.cv.kappa_values,
                    int(pthin.get("n_thinnings", base.cv.n_thinnings)),
                )
            loocv = data.get("loocv", {})
            if "k" in loocv:
                changes["loocv_k"] = int(loocv["k"])
            if "kappas" in loocv:
                grids = dict(DEFAULT_LOOCV_KAPPAS)
                grids.update({ContrastKind(k.upper()): _kappa_grid(v) for k, v in loocv["kappas"].items()})
                changes["loocv_kappas"] = tuple(grids.items())
            run = data.get("run", {})
            if "seed" in run:
                changes["seed"] = int(run["seed"])
            if "output_dir" in run:
                changes["output_dir"] = Path(run["output_dir"])
            if "jobs" in run:
                changes["jobs"] = int(run["jobs"])
            return replace(base, **changes)
        except (TypeError, KeyError, AttributeError, DomainError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid configuration: {exc}") from exc

    def to_mapping(self) -> Dict[str, Any]:
        """Inverse of from_mapping, for writing the effective config next to the results."""
        selection: Dict[str, List[str]] = {}
        for task in self.estimators:
            selection.setdefault(task.estimator.value, []).append(task.mode.value)
        return {
            "truth": asdict(self.true_params),
            "simulation": {"horizons": list(self.horizons), "n_sim": self.n_sim, "burn_in": self.burn_in},
            "spectral": {"half_width": self.half_width},
            "estimators": selection,
            "pthin": {"p_values": list(self.cv.p_values), "kappa_values": list(self.cv.kappa_values),
                      "n_thinnings": self.cv.n_thinnings},
            "loocv": {"k": self.loocv_k, "kappas": {k.value: list(v) for k, v in self.loocv_kappas}},
            "run": {"seed": self.seed, "output_dir": str(self.output_dir), "jobs": self.jobs},
        }


def _kappa_grid(value) -> Tuple[float, ...]:
    """A list of weights, or {"log2": [lo, hi]} for 2^lo .. 2^hi."""
    if isinstance(value, Mapping):
        lo, hi = value["log2"]
        return _log2_grid(int(lo), int(hi))
    return tuple(float(k) for k in value)
