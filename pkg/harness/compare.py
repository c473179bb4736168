"""Side-by-side comparison of optimizers over a scene set."""
from __future__ import annotations

import csv
import logging
import pathlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from core.base_optimizer import BaseSceneOptimizer
from core.errors import ConfigurationError
from harness.run_config import RunConfig
from harness.runner import BASE_COLUMNS, RunResult, optimize_scene
from render.settings import RenderSettings
from scene.dataset import SceneDataset

logger = logging.getLogger("L2S")

THRESHOLDS = (25, 50, 75, 90, 100)
NEVER = "never"
CURVE_METRICS = BASE_COLUMNS[2:]


@dataclass(frozen=True)
class Method:
    label: str
    run: RunConfig
    factory: Callable[[], BaseSceneOptimizer]


@dataclass(eq=False)
class MeanCurve:
    method: str
    iters: np.ndarray
    wall_ms: np.ndarray
    metrics: dict[str, np.ndarray]


def mean_curve(method: str, results: Sequence[RunResult]) -> MeanCurve:
    """Average the per-scene rows of one method point by point."""
    iters = results[0].series("iter")
    if any(not np.array_equal(r.series("iter"), iters) for r in results):
        raise ConfigurationError(f"Runs of {method} were evaluated at different iterations.")
    metrics = {name: np.mean([r.series(name) for r in results], axis=0) for name in CURVE_METRICS}
    wall = np.mean([r.series("wall_ms") for r in results], axis=0)
    return MeanCurve(method, iters, wall, metrics)


def threshold_crossing(xs: np.ndarray, ys: np.ndarray, level: float) -> Optional[float]:
    """First ``x`` where the piecewise-linear curve reaches ``level``; ``None`` if it never does."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    hits = np.flatnonzero(ys >= level)
    if hits.size == 0:
        return None
    i = int(hits[0])
    if i == 0:
        return float(xs[0])
    fraction = (level - ys[i - 1]) / (ys[i] - ys[i - 1])
    return float(xs[i - 1] + fraction * (xs[i] - xs[i - 1]))


def threshold_table(
    curves: Mapping[str, MeanCurve],
    reference: str,
    metric: str = "psnr_target",
    axis: str = "iter",
    percents: Sequence[int] = THRESHOLDS,
) -> dict[str, dict[int, Optional[float]]]:
    """Iteration (``axis="iter"``) or wall time (``"wall_ms"``) at which each method reaches a share of the reference gain."""
    if reference not in curves:
        raise ConfigurationError(f"Reference method {reference!r} is not part of the comparison.")
    ref = curves[reference].metrics[metric]
    start, gain = float(ref[0]), float(ref.max() - ref[0])
    table: dict[str, dict[int, Optional[float]]] = {}
    for name, curve in curves.items():
        xs = curve.iters if axis == "iter" else curve.wall_ms
        ys = curve.metrics[metric]
        table[name] = {p: threshold_crossing(xs, ys, start + gain * p / 100.0) for p in percents}
    return table


@dataclass(eq=False)
class Comparison:
    results: dict[str, list[RunResult]]
    curves: dict[str, MeanCurve]
    thresholds_iter: dict[str, dict[int, Optional[float]]]
    thresholds_time: dict[str, dict[int, Optional[float]]]


def compare(
    scenes: Sequence[SceneDataset],
    methods: Sequence[Method],
    reference: str,
    threads: int = 1,
    settings: Optional[RenderSettings] = None,
    metric: str = "psnr_target",
) -> Comparison:
    """Run every method on every scene; scenes run in parallel and merge in scene order."""
    if not scenes or not methods:
        raise ConfigurationError("A comparison needs at least one scene and one method.")

    def run_scene(scene: SceneDataset) -> dict[str, RunResult]:
        logger.info("Comparing %d methods on %s", len(methods), scene.scene_id)
        return {m.label: optimize_scene(scene, m.run, m.factory(), settings) for m in methods}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        per_scene = list(pool.map(run_scene, scenes))

    results = {m.label: [scene_results[m.label] for scene_results in per_scene] for m in methods}
    curves = {label: mean_curve(label, runs) for label, runs in results.items()}
    return Comparison(
        results,
        curves,
        threshold_table(curves, reference, metric, "iter"),
        threshold_table(curves, reference, metric, "wall_ms"),
    )


def _format(value: Optional[float]) -> str:
    return NEVER if value is None else f"{value:.3f}"


def write_comparison(comparison: Comparison, directory: pathlib.Path | str) -> list[pathlib.Path]:
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    curves_path = directory / "compare_curves.csv"
    with curves_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(("method", "iter", "wall_ms") + CURVE_METRICS)
        for label, curve in comparison.curves.items():
            for i, iteration in enumerate(curve.iters):
                writer.writerow([label, int(iteration), f"{curve.wall_ms[i]:.3f}"]
                                + [f"{curve.metrics[name][i]:.6f}" for name in CURVE_METRICS])
    written = [curves_path]
    for name, table in (("thresholds_iter.csv", comparison.thresholds_iter), ("thresholds_time.csv", comparison.thresholds_time)):
        path = directory / name
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["method"] + [f"p{p}" for p in THRESHOLDS])
            for label, row in table.items():
                writer.writerow([label] + [_format(row.get(p)) for p in THRESHOLDS])
        written.append(path)
    return written


__all__ = [
    "Comparison",
    "MeanCurve",
    "Method",
    "NEVER",
    "THRESHOLDS",
    "compare",
    "mean_curve",
    "threshold_crossing",
    "threshold_table",
    "write_comparison",
]
