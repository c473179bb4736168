"""The meta-training loop: checkpoint buffer, train-mode rollout, meta update, frozen rollout."""
from __future__ import annotations

import logging
import pathlib
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from tqdm import tqdm

from autodiff.params import AdamParamState, ModelParameters, adam_step_params
from core.errors import ConfigurationError, NumericalError
from l2s.config import L2SConfig
from l2s.latents import init_latents
from l2s.model import init_model
from l2s.model_file import load_trained_model, save_trained_model
from l2s.scene_optimizer import model_dtype
from meta.buffer import Checkpoint, CheckpointBuffer, T
from meta.config import MetaConfig
from meta.metrics_log import MetricsLog, MetricsRow, resident_mb
from meta.objective import MetaObjective, meta_objective
from meta.pool import ScenePool
from meta.rollout import InnerState, Rollout, inner_rollout
from optim.adam import AdamState
from render.settings import RenderSettings
from scene.dataset import SceneDataset
from utils.seeding import derive_seed, make_rng

logger = logging.getLogger("L2S")


# ---------------------------------------------------------------------------
# control flow shared by the trainer and the buffer simulation


def start_checkpoint(buffer: CheckpointBuffer[T], rng: np.random.Generator, config: MetaConfig) -> Optional[T]:
    """Pop-sample a stored checkpoint with probability ``p_buffer``; ``None`` means start fresh."""
    coin = rng.random()
    if config.use_buffer and len(buffer) and coin < config.p_buffer:
        return buffer.pop_sample(rng)
    return None


def sample_tau(rng: np.random.Generator, config: MetaConfig) -> int:
    if config.fixed_tau is not None:
        return config.fixed_tau
    return int(rng.integers(1, config.tau_max + 1))


def sample_rollout_len(rng: np.random.Generator, config: MetaConfig, meta_iter: int) -> int:
    if not config.use_buffer:
        return 0
    return int(rng.integers(1, config.tau_a(meta_iter) + 1))


def maybe_push(
    buffer: CheckpointBuffer[T], entry: T, fresh: bool, rng: np.random.Generator, config: MetaConfig
) -> bool:
    probability = config.p_push if fresh else config.p_push_back
    if rng.random() < probability:
        buffer.push(entry)
        return True
    return False


@dataclass
class _SimulatedEntry:
    inner_step_count: int


@dataclass
class BufferSimulation:
    visits: Counter = field(default_factory=Counter)
    fresh_starts: int = 0
    max_step: int = 0


def simulate_buffer(config: MetaConfig, iterations: int, seed: int = 0) -> BufferSimulation:
    """Replay the buffer decisions without any learning; counts how often each inner step is trained."""
    rng = np.random.default_rng(seed)
    buffer: CheckpointBuffer[_SimulatedEntry] = CheckpointBuffer(config.buffer_capacity)
    result = BufferSimulation()
    for meta_iter in range(iterations):
        entry = start_checkpoint(buffer, rng, config)
        fresh = entry is None
        start = 0 if fresh else entry.inner_step_count
        result.fresh_starts += int(fresh)
        tau = sample_tau(rng, config)
        result.visits.update(range(start + 1, start + tau + 1))
        result.max_step = max(result.max_step, start + tau)
        end = start + tau + sample_rollout_len(rng, config, meta_iter)
        if config.use_buffer:
            maybe_push(buffer, _SimulatedEntry(end), fresh, rng, config)
    return result


# ---------------------------------------------------------------------------
# one meta-iteration


def fresh_state(scene: SceneDataset, model_config: L2SConfig, rng: np.random.Generator, dtype) -> InnerState:
    cloud = scene.initial_cloud
    latents = init_latents(cloud.count, model_config.state_dim, derive_seed(rng), dtype=dtype)
    return InnerState(cloud, latents, AdamState.zeros(cloud.count), 0)


def meta_update(
    params: ModelParameters,
    rollout: Rollout,
    meta_adam: AdamParamState,
    config: MetaConfig,
    settings: Optional[RenderSettings] = None,
) -> MetaObjective:
    """Backpropagate the meta loss of ``rollout`` into ``params`` and take one meta-Adam step."""
    if rollout.tape is None:
        raise ConfigurationError("Meta updates need a train-mode rollout.")
    try:
        objective = meta_objective(rollout.records, config, settings)
        params.zero_grad()
        rollout.tape.backward(objective.seeds)
        grads = params.grads()
        for name, grad in grads.items():
            if not np.isfinite(grad).all():
                raise NumericalError("Non-finite meta-gradient", parameter=name)
        adam_step_params(params, grads, meta_adam, config.meta_lr, config.meta_betas, config.meta_eps)
    finally:
        rollout.release()
    return objective


def meta_iteration(
    buffer: CheckpointBuffer[Checkpoint],
    pool: ScenePool,
    params: ModelParameters,
    meta_adam: AdamParamState,
    config: MetaConfig,
    rng: np.random.Generator,
    model_config: L2SConfig,
    meta_iter: int = 0,
    settings: Optional[RenderSettings] = None,
) -> MetricsRow:
    if len(pool) == 0:
        raise ConfigurationError("The training scene pool is empty.")
    started = time.perf_counter()
    checkpoint = start_checkpoint(buffer, rng, config)
    fresh = checkpoint is None
    if fresh:
        scene = pool.sample(rng)
        state = fresh_state(scene, model_config, rng, model_dtype(params))
    else:
        scene = checkpoint.scene
        state = InnerState(checkpoint.cloud, checkpoint.latents, checkpoint.shadow_adam, checkpoint.inner_step_count)
    start = state.inner_step_count
    tau = sample_tau(rng, config)
    logger.debug("Meta iteration %d: %s from step %d, tau=%d", meta_iter, "fresh" if fresh else "buffer", start, tau)

    terms = {"render": 0.0, "lvs": 0.0, "stability": 0.0}
    chunks = [tau] if config.meta_step_mode == "trajectory" else [1] * tau
    for length in chunks:
        rollout = inner_rollout(scene, state, params, model_config, config, length, "train", rng, settings)
        objective = meta_update(params, rollout, meta_adam, config, settings)
        for name, value in objective.report.terms.items():
            terms[name] += value
        state = rollout.final
        state.latents = state.latents.detach()

    rollout_len = sample_rollout_len(rng, config, meta_iter)
    if rollout_len:
        state = inner_rollout(scene, state, params, model_config, config, rollout_len, "frozen", rng, settings).final
    if config.use_buffer:
        entry = Checkpoint(scene.scene_id, state.cloud, state.latents, state.shadow_adam, state.inner_step_count, scene)
        maybe_push(buffer, entry, fresh, rng, config)

    return MetricsRow(
        meta_iter=meta_iter,
        scene_id=scene.scene_id,
        start_inner_step=start,
        tau=tau,
        rollout_len=rollout_len,
        loss_render=terms["render"],
        loss_lvs=terms["lvs"],
        loss_stab=terms["stability"],
        loss_meta=sum(terms.values()),
        wall_ms=(time.perf_counter() - started) * 1000.0,
        rss_mb=resident_mb(),
    )


# ---------------------------------------------------------------------------
# trainer


class MetaTrainer:
    """Owns the model, its meta-optimizer state and the checkpoint buffer for one training run."""

    def __init__(
        self,
        model_config: L2SConfig,
        config: MetaConfig,
        pool: ScenePool,
        seed: int = 0,
        settings: Optional[RenderSettings] = None,
        params: Optional[ModelParameters] = None,
        meta_adam: Optional[AdamParamState] = None,
        meta_iter: int = 0,
        metrics_path: Optional[pathlib.Path | str] = None,
        checkpoint_path: Optional[pathlib.Path | str] = None,
    ) -> None:
        self.model_config = model_config
        self.config = config
        self.pool = pool
        self.seed = seed
        self.settings = settings
        self.params = params if params is not None else init_model(model_config, seed)
        self.meta_adam = meta_adam or AdamParamState()
        self.meta_iter = meta_iter
        self.buffer: CheckpointBuffer[Checkpoint] = CheckpointBuffer(config.buffer_capacity)
        self.metrics = MetricsLog(metrics_path) if metrics_path else None
        self.checkpoint_path = pathlib.Path(checkpoint_path) if checkpoint_path else None
        self.history: list[MetricsRow] = []

    @classmethod
    def resume(cls, path: pathlib.Path | str, config: MetaConfig, pool: ScenePool, **kwargs) -> "MetaTrainer":
        """Continue from a saved model: weights, meta-Adam moments and the iteration counter."""
        params, model_config, model = load_trained_model(path)
        seed = int(model.counters.get("seed", kwargs.pop("seed", 0)))
        kwargs.pop("seed", None)
        meta_iter = int(model.counters.get("meta_iter", 0))
        logger.info("Resuming meta-training from %s at iteration %d", path, meta_iter)
        return cls(model_config, config, pool, seed=seed, params=params, meta_adam=model.adam or AdamParamState(),
                   meta_iter=meta_iter, **kwargs)

    def step(self) -> MetricsRow:
        rng = make_rng(self.seed, self.meta_iter)
        row = meta_iteration(
            self.buffer, self.pool, self.params, self.meta_adam, self.config, rng,
            self.model_config, self.meta_iter, self.settings,
        )
        self.meta_iter += 1
        self.history.append(row)
        if self.metrics is not None:
            self.metrics.append(row)
        return row

    def save(self, path: Optional[pathlib.Path | str] = None) -> pathlib.Path:
        target = path or self.checkpoint_path
        if target is None:
            raise ConfigurationError("No checkpoint path configured.")
        counters = {"meta_iter": self.meta_iter, "seed": self.seed, "tau_a": self.config.tau_a(self.meta_iter)}
        return save_trained_model(target, self.params, self.model_config, counters, self.meta_adam)

    def train(self, iterations: Optional[int] = None, progress: bool = False) -> ModelParameters:
        """Run until ``iterations`` (default ``config.iterations``) meta-iterations have been completed in total."""
        total = self.config.iterations if iterations is None else iterations
        failures = 0
        bar = tqdm(total=total, initial=min(self.meta_iter, total), disable=not progress, desc="meta-train")
        try:
            while self.meta_iter < total:
                try:
                    row = self.step()
                    failures = 0
                except NumericalError as exc:
                    failures += 1
                    logger.warning("Meta iteration %d aborted: %s", self.meta_iter, exc)
                    self.meta_iter += 1
                    if failures >= self.config.max_consecutive_failures:
                        raise
                    continue
                finally:
                    bar.update(1)
                if self.meta_iter % self.config.log_every == 0:
                    logger.info(
                        "meta %d | scene %s | start %d tau %d | meta loss %.5f (render %.5f lvs %.5f stab %.5f) | buffer %d",
                        row.meta_iter, row.scene_id, row.start_inner_step, row.tau, row.loss_meta,
                        row.loss_render, row.loss_lvs, row.loss_stab, len(self.buffer),
                    )
                if self.checkpoint_path is not None and self.meta_iter % self.config.checkpoint_every == 0:
                    self.save()
        finally:
            bar.close()
        if self.checkpoint_path is not None:
            self.save()
        return self.params


def train(
    model_config: L2SConfig,
    config: MetaConfig,
    pool: ScenePool,
    seed: int = 0,
    resume: Optional[pathlib.Path | str] = None,
    **kwargs,
) -> MetaTrainer:
    """Build (or resume) a trainer and run it to ``config.iterations``."""
    progress = kwargs.pop("progress", False)
    if resume is not None:
        trainer = MetaTrainer.resume(resume, config, pool, seed=seed, **kwargs)
    else:
        trainer = MetaTrainer(model_config, config, pool, seed=seed, **kwargs)
    trainer.train(progress=progress)
    return trainer


__all__ = [
    "BufferSimulation",
    "MetaTrainer",
    "fresh_state",
    "maybe_push",
    "meta_iteration",
    "meta_update",
    "sample_rollout_len",
    "sample_tau",
    "simulate_buffer",
    "start_checkpoint",
    "train",
]
