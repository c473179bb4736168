"""Shared application context for every CLI command."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from autodiff.params import ModelParameters
from config.settings import AppConfig
from core.base_optimizer import BaseSceneOptimizer
from core.errors import ConfigurationError
from core.optimizer_registry import OptimizerRegistry
from harness.run_config import RunConfig
from l2s.config import L2SConfig
from l2s.scene_optimizer import LearnedOptimizer, LOBaselineOptimizer
from logs.logger import setup_logger
from optim.scene_optimizers import AdamOptimizer, SGDOptimizer


@dataclass(frozen=True)
class LoadedModel:
    params: ModelParameters
    config: L2SConfig


@dataclass
class AppContext:
    """Container for runtime objects reused by every command."""

    config: AppConfig
    logger: logging.Logger
    registry: OptimizerRegistry


def _require_model(name: str, model: Optional[LoadedModel], lo_baseline: bool) -> LoadedModel:
    if model is None:
        raise ConfigurationError(f"Optimizer {name!r} needs a trained model (--model).")
    if model.config.lo_baseline != lo_baseline:
        raise ConfigurationError(f"The model file does not hold a {name} model.")
    return model


def _learned(run: RunConfig, model: Optional[LoadedModel] = None) -> BaseSceneOptimizer:
    model = _require_model("l2s", model, False)
    return LearnedOptimizer(model.params, model.config, seed=run.seed)


def _lo_baseline(run: RunConfig, model: Optional[LoadedModel] = None) -> BaseSceneOptimizer:
    model = _require_model("lo-baseline", model, True)
    return LOBaselineOptimizer(model.params, model.config, seed=run.seed, horizon=run.lo_horizon)


def build_optimizer_registry() -> OptimizerRegistry:
    """Register every optimizer the harness can run, keyed by its CLI name."""
    registry = OptimizerRegistry()
    registry.register("sgd", lambda run, model=None: SGDOptimizer(run.sgd_lr), "Plain gradient descent.")
    registry.register(
        "adam-3dgs",
        lambda run, model=None: AdamOptimizer(preset="3dgs", total_steps=run.adam_total_steps),
        "Adam with the standard per-group learning rates.",
    )
    registry.register(
        "adam-3dgs-star",
        lambda run, model=None: AdamOptimizer(preset="3dgs-star", total_steps=run.adam_total_steps),
        "Adam with 5x learning rates and beta1 = 0.99.",
    )
    registry.register("l2s", _learned, "Meta-learned per-Gaussian optimizer.")
    registry.register("lo-baseline", _lo_baseline, "Time-conditioned learned optimizer baseline.")
    return registry


def create_app_context() -> AppContext:
    """Create the singleton-style runtime context.

    This function is only executed once (see :func:`get_app_context`); every
    command shares the same configuration, logger and optimizer registry.
    """

    config = AppConfig.load()
    logger = setup_logger(level=config.log_level, log_file=config.log_file)
    registry = build_optimizer_registry()
    logger.debug("Registered optimizers: %s", ", ".join(registry.names()))
    return AppContext(config=config, logger=logger, registry=registry)


@lru_cache(maxsize=1)
def get_app_context() -> AppContext:
    """Return the shared runtime context (created only once)."""

    return create_app_context()


__all__ = ["AppContext", "LoadedModel", "build_optimizer_registry", "create_app_context", "get_app_context"]
