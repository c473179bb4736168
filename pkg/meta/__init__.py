"""Meta-training of the learned optimizer."""
from meta.buffer import Checkpoint, CheckpointBuffer
from meta.config import LO_BASELINE_TRAINING, L2S_TRAINING, MetaConfig, meta_preset
from meta.metrics_log import METRICS_COLUMNS, MetricsLog, MetricsRow
from meta.objective import MetaObjective, meta_objective
from meta.pool import DirectoryScenePool, ListScenePool, SyntheticScenePool
from meta.rollout import InnerState, Rollout, StepRecord, inner_rollout
from meta.trainer import MetaTrainer, meta_iteration, simulate_buffer, train

__all__ = [
    "Checkpoint",
    "CheckpointBuffer",
    "DirectoryScenePool",
    "InnerState",
    "LO_BASELINE_TRAINING",
    "L2S_TRAINING",
    "ListScenePool",
    "METRICS_COLUMNS",
    "MetaConfig",
    "MetaObjective",
    "MetaTrainer",
    "MetricsLog",
    "MetricsRow",
    "Rollout",
    "StepRecord",
    "SyntheticScenePool",
    "inner_rollout",
    "meta_iteration",
    "meta_objective",
    "meta_preset",
    "simulate_buffer",
    "train",
]
