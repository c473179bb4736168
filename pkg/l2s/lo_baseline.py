"""Time-conditioned baseline: shared trunk, linear 59-wide head, cosine-decayed updates."""
from __future__ import annotations

import numpy as np

from autodiff import ops
from autodiff.params import ModelParameters
from core.errors import ConfigurationError
from l2s.config import L2SConfig
from l2s.latents import LatentStates
from l2s.model import L2SStepResult, UpdatePrediction, apply_delta, assemble_input, linear, point_transformer_forward
from optim.schedules import cosine_lr, time_encoding
from scene.gaussians import GaussianCloud
from spatial.knn import NeighborTable

DEFAULT_HORIZON = 100


def lo_baseline_step(
    cloud: GaussianCloud,
    adam_grads: np.ndarray,
    states: LatentStates,
    params: ModelParameters,
    neighbors: NeighborTable,
    config: L2SConfig,
    t: int,
    T: int = DEFAULT_HORIZON,
) -> L2SStepResult:
    """``G_{t+1} = G_t - cosine_lr(t, T) * head(s_{t+1})`` with ``time_encoding(t / T)`` in the input."""
    if not config.lo_baseline:
        raise ConfigurationError("lo_baseline_step needs a config with lo_baseline=True.")
    x = assemble_input(adam_grads, cloud, states.s, time_features=time_encoding(t, T))
    next_states = point_transformer_forward(x, neighbors, params, config)
    delta = ops.scale(linear(next_states, params, "lo.head"), cosine_lr(t, T))
    return L2SStepResult(apply_delta(cloud, delta.data), LatentStates(next_states), UpdatePrediction(delta=delta))


__all__ = ["DEFAULT_HORIZON", "lo_baseline_step"]
