"""Standard optimizers, parameter groups and schedules."""
from optim.adam import AdamState, adam_normalize, adam_step, adam_update
from optim.groups import ParamGroupConfig, group_slices, optimizer_preset, update_norms
from optim.normalize import g3r_normalize
from optim.schedules import cosine_lr, log_linear_lr, time_encoding
from optim.sgd import sgd_step

__all__ = [
    "AdamState",
    "ParamGroupConfig",
    "adam_normalize",
    "adam_step",
    "adam_update",
    "cosine_lr",
    "g3r_normalize",
    "group_slices",
    "log_linear_lr",
    "optimizer_preset",
    "sgd_step",
    "time_encoding",
    "update_norms",
]
