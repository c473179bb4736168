"""Implementations of the CLI verbs."""
from __future__ import annotations

import dataclasses
import logging
import pathlib
from typing import Optional, Sequence

from config.files import FileConfig
from core.base_optimizer import BaseSceneOptimizer
from core.errors import ConfigurationError
from harness.compare import Method, compare, write_comparison
from harness.context import AppContext, LoadedModel
from harness.plots import plot_comparison
from harness.run_config import RunConfig
from harness.runner import optimize_scene, swap_study, write_rows
from l2s.model_file import load_trained_model
from meta.pool import DirectoryScenePool, SyntheticScenePool
from meta.trainer import MetaTrainer
from optim.scene_optimizers import AdamOptimizer
from render.settings import RenderSettings
from scene.dataset import SceneDataset, SceneSpec
from scene.io import load_scene, save_scene
from scene.synthetic import generate_synthetic_scene

logger = logging.getLogger("L2S")


def render_settings(files: FileConfig, threads: int) -> RenderSettings:
    return RenderSettings(background=files.scene.background, threads=threads)


def load_model_file(path: Optional[pathlib.Path | str]) -> Optional[LoadedModel]:
    if path is None:
        return None
    params, config, _ = load_trained_model(path)
    return LoadedModel(params, config)


def make_optimizer(
    context: AppContext,
    run: RunConfig,
    files: FileConfig,
    models: dict[str, Optional[LoadedModel]],
) -> BaseSceneOptimizer:
    if run.optimizer.startswith("adam-"):
        preset = run.optimizer.removeprefix("adam-")
        config = files.adam_config(preset, run.adam_total_steps)
        if config is not None:
            return AdamOptimizer(config=config, preset=preset)
    return context.registry.create(run.optimizer, run=run, model=models.get(run.optimizer))


def cmd_gen(spec: SceneSpec, seed: int, out_dir: pathlib.Path | str, count: int = 1) -> list[pathlib.Path]:
    """Generate ``count`` synthetic scenes with consecutive seeds."""
    if count < 1:
        raise ConfigurationError("--count must be at least 1.")
    out_dir = pathlib.Path(out_dir)
    written = []
    for offset in range(count):
        scene = generate_synthetic_scene(seed + offset, spec)
        written.append(save_scene(scene, out_dir / scene.scene_id))
    logger.info("Generated %d scene(s) in %s", count, out_dir)
    return written


def cmd_meta_train(
    context: AppContext,
    files: FileConfig,
    out_model: pathlib.Path | str,
    scenes: Optional[pathlib.Path | str] = None,
    synthetic_count: int = 200,
    resume: Optional[pathlib.Path | str] = None,
    metrics_path: Optional[pathlib.Path | str] = None,
    progress: bool = True,
) -> pathlib.Path:
    """Meta-train on a scene directory or on a generated synthetic pool; returns the model path."""
    seed = context.config.seed
    pool = DirectoryScenePool(scenes) if scenes else SyntheticScenePool(files.scene, synthetic_count, base_seed=seed)
    out_model = pathlib.Path(out_model)
    metrics_path = metrics_path or out_model.with_suffix(".csv")
    settings = render_settings(files, context.config.threads)
    model_config = files.model
    if files.meta.meta_step_mode == "per_step" and not model_config.lo_baseline:
        model_config = dataclasses.replace(model_config, lo_baseline=True)
    kwargs = dict(settings=settings, metrics_path=metrics_path, checkpoint_path=out_model)
    if resume is not None:
        trainer = MetaTrainer.resume(resume, files.meta, pool, **kwargs)
    else:
        trainer = MetaTrainer(model_config, files.meta, pool, seed=seed, **kwargs)
    logger.info(
        "Meta-training %s model (%d weights) for %d iterations on %d scenes",
        "lo-baseline" if trainer.model_config.lo_baseline else "l2s",
        trainer.params.size, files.meta.iterations, len(pool),
    )
    trainer.train(progress=progress)
    return trainer.save(out_model)


def _models(model: Optional[pathlib.Path | str], lo_model: Optional[pathlib.Path | str]) -> dict[str, Optional[LoadedModel]]:
    return {"l2s": load_model_file(model), "lo-baseline": load_model_file(lo_model)}


def cmd_optimize(
    context: AppContext,
    files: FileConfig,
    scene_dir: pathlib.Path | str,
    out_dir: pathlib.Path | str,
    model: Optional[pathlib.Path | str] = None,
    lo_model: Optional[pathlib.Path | str] = None,
) -> pathlib.Path:
    scene = load_scene(scene_dir)
    run = files.run
    optimizer = make_optimizer(context, run, files, _models(model or run.model_path, lo_model))
    out_dir = pathlib.Path(out_dir)
    result = optimize_scene(scene, run, optimizer, render_settings(files, context.config.threads), out_dir / "snapshots")
    path = write_rows(out_dir / "metrics.csv", result)
    final = result.rows[-1]
    logger.info("%s on %s: target PSNR %.3f dB after %d iterations", optimizer.name, scene.scene_id,
                final["psnr_target"], int(final["iter"]))
    return path


def _load_scenes(scene_dirs: Sequence[pathlib.Path | str]) -> list[SceneDataset]:
    scenes = []
    for entry in scene_dirs:
        scenes.extend(DirectoryScenePool(entry).scenes)
    return scenes


def cmd_compare(
    context: AppContext,
    files: FileConfig,
    scene_dirs: Sequence[pathlib.Path | str],
    methods: Sequence[str],
    reference: str,
    out_dir: pathlib.Path | str,
    model: Optional[pathlib.Path | str] = None,
    lo_model: Optional[pathlib.Path | str] = None,
) -> list[pathlib.Path]:
    if reference not in methods:
        raise ConfigurationError(f"Reference {reference!r} must be one of the compared methods {list(methods)}.")
    scenes = _load_scenes(scene_dirs)
    models = _models(model or files.run.model_path, lo_model)
    entries = []
    for name in methods:
        run = dataclasses.replace(files.run, optimizer=name, snapshots=False)
        entries.append(Method(name, run, lambda run=run: make_optimizer(context, run, files, models)))
    threads = 1 if context.config.deterministic else context.config.threads
    comparison = compare(scenes, entries, reference, threads, render_settings(files, 1))
    written = write_comparison(comparison, out_dir)
    written += plot_comparison(comparison.curves, out_dir)
    logger.info("Comparison of %s over %d scenes written to %s", ", ".join(methods), len(scenes), out_dir)
    return written


def cmd_swap_study(
    context: AppContext,
    files: FileConfig,
    scene_dir: pathlib.Path | str,
    group: str,
    source: str,
    target: str,
    out_dir: pathlib.Path | str,
    model: Optional[pathlib.Path | str] = None,
    lo_model: Optional[pathlib.Path | str] = None,
) -> pathlib.Path:
    scene = load_scene(scene_dir)
    models = _models(model or files.run.model_path, lo_model)
    source_opt = make_optimizer(context, dataclasses.replace(files.run, optimizer=source), files, models)
    target_opt = make_optimizer(context, dataclasses.replace(files.run, optimizer=target), files, models)
    result = swap_study(scene, files.run, group, source_opt, target_opt, render_settings(files, context.config.threads))
    path = write_rows(pathlib.Path(out_dir) / f"swap_{group}_{source}_into_{target}.csv", result)
    logger.info("Swap study (%s from %s into %s) written to %s", group, source, target, path)
    return path


__all__ = ["cmd_compare", "cmd_gen", "cmd_meta_train", "cmd_optimize", "cmd_swap_study", "load_model_file", "make_optimizer"]
