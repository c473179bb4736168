"""Per-scene optimization runs with metrics at cadence points."""
from __future__ import annotations

import csv
import logging
import pathlib
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from core.base_optimizer import BaseSceneOptimizer
from core.errors import NumericalError
from harness.metrics import score_scene
from harness.run_config import RunConfig
from losses.image import d_ssim, l1
from losses.scene import scene_gradient
from optim.groups import GROUP_NAMES, group_mask, update_norms
from render.rasterizer import render
from render.settings import RenderSettings
from scene.camera import View
from scene.dataset import SceneDataset
from scene.gaussians import GaussianCloud
from scene.sampling import select_views_fps
from utils.images import save_image
from utils.seeding import derive_seed, make_rng

logger = logging.getLogger("L2S")

BASE_COLUMNS = ("iter", "wall_ms", "psnr_context", "psnr_target", "ssim_context", "ssim_target")
LOSS_COLUMNS = ("loss", "l1_target", "dssim_target")
NORM_COLUMNS = tuple(f"update_norm_{name}" for name in GROUP_NAMES)

Propose = Callable[[GaussianCloud, np.ndarray, int], np.ndarray]


@dataclass(eq=False)
class RunResult:
    scene_id: str
    label: str
    rows: list[dict[str, float]]
    final_cloud: GaussianCloud
    columns: tuple[str, ...] = field(default=BASE_COLUMNS)

    def series(self, column: str) -> np.ndarray:
        return np.array([row[column] for row in self.rows], dtype=np.float64)


def batch_views(scene: SceneDataset, run: RunConfig, rng: np.random.Generator) -> Sequence[View]:
    if run.views == "fixed-all":
        return scene.context_views
    count = min(run.batch_size, len(scene.context_views))
    return select_views_fps(scene.context_views, count, seed=derive_seed(rng))


def _snapshot(cloud: GaussianCloud, scene: SceneDataset, iteration: int, directory: pathlib.Path, settings) -> None:
    for view in scene.target_views:
        save_image(directory / f"{view.name}_{iteration:06}.png", render(cloud, view, settings).rgb)


def _evaluate(cloud, scene, run, iteration, wall_ms, settings) -> dict[str, float]:
    row: dict[str, float] = {"iter": iteration, "wall_ms": wall_ms}
    row.update(score_scene(cloud, scene, settings).as_row())
    if run.per_term_losses:
        renders = [render(cloud, view, settings).rgb for view in scene.target_views]
        row["l1_target"] = float(np.mean([l1(v.image, rgb).value for v, rgb in zip(scene.target_views, renders)]))
        row["dssim_target"] = float(np.mean([d_ssim(v.image, rgb).value for v, rgb in zip(scene.target_views, renders)]))
    return row


def run_optimization(
    scene: SceneDataset,
    run: RunConfig,
    propose: Propose,
    diagnostics: Callable[[], dict[str, float]] = dict,
    label: str = "run",
    settings: Optional[RenderSettings] = None,
    snapshot_dir: Optional[pathlib.Path | str] = None,
) -> RunResult:
    """
    Drive ``propose`` for ``run.iterations`` steps from the scene's initial cloud.

    ``wall_ms`` counts only optimization work (gradients and updates), not
    evaluation or snapshots. Columns outside ``run.update_mask()`` never move.
    """
    rng = make_rng(run.seed, 1)
    mask = run.update_mask().astype(np.float64)
    points = set(run.evaluation_points)
    snapshot_dir = pathlib.Path(snapshot_dir) if snapshot_dir and run.snapshots else None
    cloud = scene.initial_cloud
    rows = [_evaluate(cloud, scene, run, 0, 0.0, settings)]
    if snapshot_dir is not None:
        _snapshot(cloud, scene, 0, snapshot_dir, settings)
    elapsed = 0.0
    for iteration in range(1, run.iterations + 1):
        started = time.perf_counter()
        views = batch_views(scene, run, rng)
        gradient = scene_gradient(cloud, views, settings)
        delta = np.asarray(propose(cloud, gradient.grads, iteration - 1), dtype=np.float64) * mask[None, :]
        cloud = cloud.with_params(cloud.params - delta.astype(cloud.dtype))
        elapsed += (time.perf_counter() - started) * 1000.0
        try:
            cloud.check_finite()
        except NumericalError as exc:
            raise NumericalError(f"{label} diverged", scene_id=scene.scene_id, step=iteration) from exc
        if iteration not in points:
            continue
        row = _evaluate(cloud, scene, run, iteration, elapsed, settings)
        row["loss"] = gradient.loss
        row.update({f"update_norm_{name}": value for name, value in update_norms(delta).items()})
        row.update(diagnostics())
        rows.append(row)
        logger.debug("%s %s iter %d: target PSNR %.3f", scene.scene_id, label, iteration, row["psnr_target"])
        if snapshot_dir is not None:
            _snapshot(cloud, scene, iteration, snapshot_dir, settings)

    extra = sorted({key for row in rows for key in row} - set(BASE_COLUMNS) - set(LOSS_COLUMNS) - set(NORM_COLUMNS))
    present = [c for c in LOSS_COLUMNS + NORM_COLUMNS if any(c in row for row in rows)]
    return RunResult(scene.scene_id, label, rows, cloud, BASE_COLUMNS + tuple(present) + tuple(extra))


def optimize_scene(
    scene: SceneDataset,
    run: RunConfig,
    optimizer: BaseSceneOptimizer,
    settings: Optional[RenderSettings] = None,
    snapshot_dir: Optional[pathlib.Path | str] = None,
) -> RunResult:
    optimizer.reset(scene.initial_cloud)
    return run_optimization(scene, run, optimizer.propose, optimizer.diagnostics, optimizer.name, settings, snapshot_dir)


def swap_study(
    scene: SceneDataset,
    run: RunConfig,
    group: str,
    source: BaseSceneOptimizer,
    target: BaseSceneOptimizer,
    settings: Optional[RenderSettings] = None,
) -> RunResult:
    """Apply ``target``'s update except for ``group``, whose columns come from ``source``."""
    columns = group_mask([group])
    source.reset(scene.initial_cloud)
    target.reset(scene.initial_cloud)

    def propose(cloud: GaussianCloud, grads: np.ndarray, iteration: int) -> np.ndarray:
        swapped = np.array(target.propose(cloud, grads, iteration), dtype=np.float64)
        swapped[:, columns] = np.asarray(source.propose(cloud, grads, iteration), dtype=np.float64)[:, columns]
        return swapped

    def diagnostics() -> dict[str, float]:
        return {**source.diagnostics(), **target.diagnostics()}

    label = f"{target.name}+{source.name}:{group}"
    return run_optimization(scene, run, propose, diagnostics, label, settings)


def write_rows(path: pathlib.Path | str, result: RunResult) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(result.columns), restval="", extrasaction="ignore")
        writer.writeheader()
        writer.writerows(result.rows)
    return path


__all__ = ["BASE_COLUMNS", "RunResult", "batch_views", "optimize_scene", "run_optimization", "swap_study", "write_rows"]
