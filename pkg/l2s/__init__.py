"""The learned per-Gaussian optimizer."""
from l2s.config import DESK, PAPER, L2SConfig, model_preset
from l2s.latents import LatentStates, init_latents
from l2s.lo_baseline import lo_baseline_step
from l2s.model import (
    L2SStepResult,
    UpdatePrediction,
    assemble_input,
    init_model,
    l2s_step,
    model_layout,
    point_transformer_forward,
    state_scale_forward,
    update_mlp_forward,
)
from l2s.scene_optimizer import LearnedOptimizer, LOBaselineOptimizer

__all__ = [
    "DESK",
    "L2SConfig",
    "L2SStepResult",
    "LOBaselineOptimizer",
    "LatentStates",
    "LearnedOptimizer",
    "PAPER",
    "UpdatePrediction",
    "assemble_input",
    "init_latents",
    "init_model",
    "l2s_step",
    "lo_baseline_step",
    "model_layout",
    "model_preset",
    "point_transformer_forward",
    "state_scale_forward",
    "update_mlp_forward",
]
