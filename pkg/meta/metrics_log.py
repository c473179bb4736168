"""Append-only CSV log of meta-training iterations."""
from __future__ import annotations

import csv
import pathlib
from dataclasses import asdict, dataclass, fields

import psutil

METRICS_COLUMNS = (
    "meta_iter",
    "scene_id",
    "start_inner_step",
    "tau",
    "rollout_len",
    "loss_render",
    "loss_lvs",
    "loss_stab",
    "loss_meta",
    "wall_ms",
    "rss_mb",
)


@dataclass(frozen=True, slots=True)
class MetricsRow:
    meta_iter: int
    scene_id: str
    start_inner_step: int
    tau: int
    rollout_len: int
    loss_render: float
    loss_lvs: float
    loss_stab: float
    loss_meta: float
    wall_ms: float
    rss_mb: float = 0.0


def resident_mb() -> float:
    return psutil.Process().memory_info().rss / (1024.0 * 1024.0)


class MetricsLog:
    """Writes the header once; later runs (and resumed runs) append rows."""

    def __init__(self, path: pathlib.Path | str) -> None:
        self.path = pathlib.Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with self.path.open("w", newline="", encoding="utf-8") as handle:
                csv.writer(handle).writerow(METRICS_COLUMNS)

    def append(self, row: MetricsRow) -> None:
        values = asdict(row)
        with self.path.open("a", newline="", encoding="utf-8") as handle:
            csv.writer(handle).writerow([values[f.name] for f in fields(MetricsRow)])


def read_metrics(path: pathlib.Path | str) -> list[dict[str, str]]:
    with pathlib.Path(path).open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


__all__ = ["METRICS_COLUMNS", "MetricsLog", "MetricsRow", "read_metrics", "resident_mb"]
