"""Learned optimizers wrapped for the per-scene harness."""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from autodiff.params import ModelParameters
from core.base_optimizer import BaseSceneOptimizer
from core.errors import ConfigurationError
from l2s.config import L2SConfig
from l2s.latents import LatentStates, init_latents
from l2s.lo_baseline import DEFAULT_HORIZON, lo_baseline_step
from l2s.model import L2SStepResult, l2s_step, model_layout
from optim.adam import AdamState, adam_normalize
from scene.gaussians import GaussianCloud
from spatial.knn import NeighborTable, build_knn

logger = logging.getLogger("L2S")


def model_dtype(params: ModelParameters) -> np.dtype:
    return params[params.names[0]].data.dtype


class LearnedOptimizer(BaseSceneOptimizer):
    """
    Runs a trained model as a scene optimizer.

    Owns the per-Gaussian latent states, the shadow Adam that normalizes raw
    gradients, and the neighbour table (rebuilt every ``knn_refresh`` steps).
    """

    def __init__(self, params: ModelParameters, config: L2SConfig, seed: int = 0, name: str = "l2s") -> None:
        super().__init__(name, "Meta-learned per-Gaussian update model.")
        params.check_layout(model_layout(config))
        self.params = params
        self.config = config
        self.seed = seed
        self.states: Optional[LatentStates] = None
        self.shadow: Optional[AdamState] = None
        self.neighbors: Optional[NeighborTable] = None
        self._last: Optional[L2SStepResult] = None

    def reset(self, cloud: GaussianCloud) -> None:
        self.states = init_latents(cloud.count, self.config.state_dim, self.seed, dtype=model_dtype(self.params))
        self.shadow = AdamState.zeros(cloud.count)
        self.neighbors = None
        self._last = None

    def _refresh_neighbors(self, cloud: GaussianCloud, iteration: int) -> NeighborTable:
        if self.neighbors is None or iteration % self.config.knn_refresh == 0:
            self.neighbors = build_knn(cloud.means, self.config.k_neighbors, self.config.include_self)
            logger.debug("%s rebuilt the neighbour table at iteration %d", self.name, iteration)
        return self.neighbors

    def _step(self, cloud: GaussianCloud, adam_grads: np.ndarray, iteration: int) -> L2SStepResult:
        return l2s_step(cloud, adam_grads, self.states, self.params, self._refresh_neighbors(cloud, iteration), self.config)

    def propose(self, cloud: GaussianCloud, grads: np.ndarray, iteration: int) -> np.ndarray:
        if self.states is None or self.states.count != cloud.count:
            self.reset(cloud)
        adam_grads, self.shadow = adam_normalize(grads, self.shadow)
        result = self._step(cloud, adam_grads, iteration)
        self.states = result.states
        self._last = result
        return result.prediction.delta.data.astype(np.float64)

    def diagnostics(self) -> dict[str, float]:
        if self.states is None:
            return {}
        figures = {"state_norm": self.states.mean_norm()}
        if self._last is not None and self._last.prediction.state_scale is not None:
            figures["state_scale_mean"] = float(self._last.prediction.state_scale_array.mean())
            figures["magnitude_mean"] = float(self._last.prediction.magnitude_array.mean())
        return figures


class LOBaselineOptimizer(LearnedOptimizer):
    def __init__(
        self, params: ModelParameters, config: L2SConfig, seed: int = 0, horizon: int = DEFAULT_HORIZON
    ) -> None:
        if not config.lo_baseline:
            raise ConfigurationError("LOBaselineOptimizer needs a config with lo_baseline=True.")
        super().__init__(params, config, seed, name="lo-baseline")
        self.description = "Time-conditioned learned optimizer with a cosine learning-rate factor."
        self.horizon = horizon

    def _step(self, cloud: GaussianCloud, adam_grads: np.ndarray, iteration: int) -> L2SStepResult:
        neighbors = self._refresh_neighbors(cloud, iteration)
        return lo_baseline_step(cloud, adam_grads, self.states, self.params, neighbors, self.config, iteration, self.horizon)

    def diagnostics(self) -> dict[str, float]:
        figures = super().diagnostics()
        if self._last is not None:
            figures["magnitude_mean"] = float(self._last.prediction.magnitude_array.mean())
        return figures


__all__ = ["LOBaselineOptimizer", "LearnedOptimizer", "model_dtype"]
