"""CSV metric files (UTF-8, LF line endings, header row always present)."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

TRAIN_COLUMNS = (
    "step",
    "update",
    "mean_return",
    "deliveries",
    "collisions",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_frac",
    "approx_kl",
)
EVAL_COLUMNS = ("step", "update", "episodes", "mean_return", "std_return", "deliveries", "collisions")
EPISODE_COLUMNS = ("episode", "return", "deliveries", "collisions")
BRIDGE_COLUMNS = ("tick", "robot_id", "track_err_m", "pose_age_ticks", "mirrored_deliveries")

_STR_COLUMNS = {"variant"}
_INT_COLUMNS = {"step", "update", "episode", "episodes", "seed", "tick", "robot_id", "mirrored_deliveries"}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        # repr round-trips exactly; "nan" marks not-yet-available values
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_metrics(
    rows: Iterable[Mapping[str, object]], path: str | Path, columns: Sequence[str] = TRAIN_COLUMNS
) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row[c]) for c in columns])
    except OSError as e:
        raise OSError(f"cannot write metrics {path}: {e}") from e
    return path


def read_metrics(path: str | Path) -> list[dict[str, float | int]]:
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            out.append({k: _parse(k, v) for k, v in row.items()})
    return out


def _parse(column: str, value: str):
    if column in _STR_COLUMNS:
        return value
    if column in _INT_COLUMNS:
        return int(value)
    return float(value)
