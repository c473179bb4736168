"""Inner-loop rollouts of the learned optimizer on one scene."""
from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from autodiff.params import ModelParameters
from autodiff.tensor import Tape, Tensor2
from core.errors import ConfigurationError, NumericalError
from l2s.config import L2SConfig
from l2s.latents import LatentStates
from l2s.lo_baseline import lo_baseline_step
from l2s.model import l2s_step
from losses.scene import scene_gradient
from meta.config import MetaConfig
from optim.adam import AdamState, adam_normalize
from render.rasterizer import render
from render.settings import RenderSettings
from scene.camera import View
from scene.dataset import SceneDataset
from scene.gaussians import GaussianCloud
from scene.sampling import select_views_fps
from spatial.knn import NeighborTable, build_knn
from utils.seeding import derive_seed

logger = logging.getLogger("L2S")

RolloutMode = Literal["train", "frozen"]


@dataclass(eq=False)
class InnerState:
    cloud: GaussianCloud
    latents: LatentStates
    shadow_adam: AdamState
    inner_step_count: int = 0


@dataclass(eq=False)
class StepRecord:
    """One learned update and, in train mode, what the meta loss needs from it."""

    step: int
    context_names: tuple[str, ...]
    target_names: tuple[str, ...]
    inner_loss: float
    delta: Tensor2
    raw_grads: np.ndarray
    adam_grads: np.ndarray
    cloud_after: GaussianCloud
    views: tuple[View, ...] = ()
    renders: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @property
    def n_context(self) -> int:
        return len(self.context_names)


@dataclass(eq=False)
class Rollout:
    records: list[StepRecord]
    final: InnerState
    tape: Optional[Tape] = None

    def release(self) -> None:
        if self.tape is not None:
            self.tape.release()
            self.tape = None


def target_batch(scene: SceneDataset, config: MetaConfig) -> tuple[View, ...]:
    return scene.target_views[: min(config.target_views, len(scene.target_views))]


def context_pool(scene: SceneDataset, config: MetaConfig) -> tuple[View, ...]:
    if config.view_policy == "fixed":
        return scene.context_views[: min(config.context_batch, len(scene.context_views))]
    size = min(config.pool_size, len(scene.context_views))
    return tuple(select_views_fps(scene.context_views, size, first_index=0))


def context_batch(pool: tuple[View, ...], config: MetaConfig, rng: np.random.Generator) -> tuple[View, ...]:
    if config.view_policy == "fixed":
        return pool
    return tuple(select_views_fps(pool, min(config.context_batch, len(pool)), seed=derive_seed(rng)))


def inner_rollout(
    scene: SceneDataset,
    state: InnerState,
    params: ModelParameters,
    model_config: L2SConfig,
    config: MetaConfig,
    tau: int,
    mode: RolloutMode,
    rng: np.random.Generator,
    settings: Optional[RenderSettings] = None,
) -> Rollout:
    """
    Run ``tau`` learned updates from ``state``.

    In ``train`` mode the steps run on a live tape so the recorded deltas
    stay connected to the model weights through the latent states, and
    every step renders its context batch and the fixed target views from
    the updated cloud. ``frozen`` mode builds no graph and skips those
    renders; both modes consume ``rng`` identically.
    """
    if tau < 1:
        raise ConfigurationError("A rollout needs tau >= 1.")
    if mode not in ("train", "frozen"):
        raise ConfigurationError(f"Unknown rollout mode {mode!r}.")
    train = mode == "train"
    targets = target_batch(scene, config)
    pool = context_pool(scene, config)
    tape = Tape() if train else None
    cloud, latents, shadow = state.cloud, state.latents.detach(), state.shadow_adam
    neighbors: Optional[NeighborTable] = None
    records: list[StepRecord] = []
    refresh = model_config.knn_refresh_train if train else model_config.knn_refresh

    for i in range(tau):
        step = state.inner_step_count + i + 1
        views = context_batch(pool, config, rng)
        try:
            gradient = scene_gradient(cloud, views, settings)
        except NumericalError as exc:
            raise NumericalError("Inner loss is not finite", scene_id=scene.scene_id, step=step) from exc
        adam_grads, shadow = adam_normalize(gradient.grads, shadow)
        if neighbors is None or i % refresh == 0:
            neighbors = build_knn(cloud.means, model_config.k_neighbors, model_config.include_self)

        with tape if tape is not None else contextlib.nullcontext():
            if model_config.lo_baseline:
                result = lo_baseline_step(
                    cloud, adam_grads, latents, params, neighbors, model_config, step - 1, config.lo_horizon
                )
            else:
                result = l2s_step(cloud, adam_grads, latents, params, neighbors, model_config)

        try:
            result.cloud.check_finite()
        except NumericalError as exc:
            raise NumericalError("Learned update produced non-finite parameters", scene_id=scene.scene_id, step=step) from exc

        rendered_views: tuple[View, ...] = ()
        renders: tuple[np.ndarray, ...] = ()
        if train:
            rendered_views = tuple(views) + targets
            renders = tuple(render(result.cloud, view, settings).rgb for view in rendered_views)
        records.append(
            StepRecord(
                step=step,
                context_names=tuple(v.name for v in views),
                target_names=tuple(v.name for v in targets),
                inner_loss=gradient.loss,
                delta=result.prediction.delta,
                raw_grads=gradient.grads,
                adam_grads=adam_grads,
                cloud_after=result.cloud,
                views=rendered_views,
                renders=renders,
            )
        )
        logger.debug("%s step %d (%s): inner loss %.6f", scene.scene_id, step, mode, gradient.loss)
        cloud, latents = result.cloud, result.states

    final = InnerState(cloud, latents if train else latents.detach(), shadow, state.inner_step_count + tau)
    return Rollout(records, final, tape)


__all__ = ["InnerState", "Rollout", "RolloutMode", "StepRecord", "context_batch", "context_pool", "inner_rollout", "target_batch"]
