"""File formats: config files, event-time files, replication CSVs and JSON reports."""
from pathlib import Path
from typing import Any, Dict, Iterable, Union
import json
import logging

import numpy as np
import pandas as pd

from hawkspec.core import DomainError, ObservationWindow, PointPattern
from hawkspec.executor import CSV_FIELDS, ReplicationRecord
from hawkspec.planner import ConfigError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"


def save_report(report: Dict[str, Any], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, allow_nan=False)
        f.write("\n")


def load_config(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def write_events(pattern: PointPattern, path: PathLike) -> None:
    """One time per line under a '# window <start> <end>' header."""
    w = pattern.window
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# window {w.start:.17g} {w.end:.17g}\n")
        for t in pattern.times:
            f.write(f"{t:.17g}\n")


def read_events(path: PathLike) -> PointPattern:
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]
    if not lines or not lines[0].startswith("#"):
        raise DomainError(f"{path}: missing '# window <start> <end>' header")
    parts = lines[0].lstrip("#").split()
    if len(parts) != 3 or parts[0] != "window":
        raise DomainError(f"{path}: malformed header {lines[0]!r}")
    window = ObservationWindow(float(parts[1]), float(parts[2]))
    times = np.array([float(x) for x in lines[1:] if not x.startswith("#")], dtype=np.float64)
    return PointPattern(times, window)


def records_frame(records: Iterable[ReplicationRecord]) -> pd.DataFrame:
    rows = [{name: getattr(r, name) for name in CSV_FIELDS} for r in records]
    frame = pd.DataFrame(rows, columns=list(CSV_FIELDS))
    frame["converged"] = frame["converged"].astype(int)
    frame["p_hat"] = frame["p_hat"].astype(float)
    frame["kappa_hat"] = frame["kappa_hat"].astype(float)
    return frame


def write_table(frame: pd.DataFrame, path: PathLike) -> None:
    """UTF-8, LF endings, '.' decimals, 17 significant digits, empty cells for missing values."""
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n",
                 encoding="utf-8")


def write_records_csv(records: Iterable[ReplicationRecord], path: PathLike) -> None:
    write_table(records_frame(records), path)


def ensure_output_dir(path: PathLike) -> Path:
    """Create the directory and check it accepts files."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        marker = out / ".write-test"
        marker.write_text("", encoding="utf-8")
        marker.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out
