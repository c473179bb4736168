"""Parameter groups of the 59-column layout and their learning rates."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from core.errors import ConfigurationError
from optim.schedules import log_linear_lr
from scene.gaussians import PARAM_COUNT

GROUP_SLICES: dict[str, slice] = {
    "means": slice(0, 3),
    "rotations": slice(3, 7),
    "scales": slice(7, 10),
    "opacities": slice(10, 11),
    "sh0": slice(11, 14),
    "shN": slice(14, 59),
}
GROUP_NAMES = tuple(GROUP_SLICES)


def group_slices() -> dict[str, slice]:
    return dict(GROUP_SLICES)


def group_mask(groups) -> np.ndarray:
    """Boolean column mask selecting ``groups``."""
    mask = np.zeros(PARAM_COUNT, dtype=bool)
    for name in groups:
        if name not in GROUP_SLICES:
            raise ConfigurationError(f"Unknown parameter group {name!r}; expected one of {GROUP_NAMES}.")
        mask[GROUP_SLICES[name]] = True
    return mask


def update_norms(delta: np.ndarray) -> dict[str, float]:
    """Mean per-Gaussian L2 norm of the update restricted to each group."""
    delta = np.asarray(delta, dtype=np.float64)
    return {name: float(np.linalg.norm(delta[:, cols], axis=1).mean()) for name, cols in GROUP_SLICES.items()}


@dataclass(frozen=True, slots=True)
class ParamGroupConfig:
    lrs: dict[str, float] = field(
        default_factory=lambda: {
            "means": 1.6e-4,
            "scales": 5e-3,
            "rotations": 1e-3,
            "opacities": 5e-2,
            "sh0": 2.5e-3,
            "shN": 1.25e-4,
        }
    )
    means_lr_final: float = 1e-5
    means_lr_steps: int = 30000
    means_decay: bool = True
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-15
    frozen: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if set(self.lrs) != set(GROUP_NAMES):
            raise ConfigurationError(f"lrs must name exactly the groups {GROUP_NAMES}.")
        if any(lr <= 0 for lr in self.lrs.values()) or self.means_lr_final <= 0:
            raise ConfigurationError("Learning rates must be positive; freeze groups instead of zeroing them.")
        if not all(0.0 <= beta < 1.0 for beta in self.betas):
            raise ConfigurationError("betas must lie in [0, 1).")
        if self.means_lr_steps < 1:
            raise ConfigurationError("means_lr_steps must be at least 1.")
        group_mask(self.frozen)

    def lr_vector(self, step: int) -> np.ndarray:
        """Learning rate of every column for the update taken after ``step`` earlier updates."""
        lr = np.zeros(PARAM_COUNT)
        for name, cols in GROUP_SLICES.items():
            lr[cols] = self.lrs[name]
        if self.means_decay:
            lr[GROUP_SLICES["means"]] = log_linear_lr(step, self.lrs["means"], self.means_lr_final, self.means_lr_steps)
        lr[group_mask(self.frozen)] = 0.0
        return lr

    def with_frozen(self, groups) -> "ParamGroupConfig":
        return replace(self, frozen=tuple(groups))

    def with_uniform_lr(self, lr: float) -> "ParamGroupConfig":
        return replace(self, lrs={name: lr for name in GROUP_NAMES}, means_decay=False)


def preset_3dgs(total_steps: int = 30000) -> ParamGroupConfig:
    return ParamGroupConfig(means_lr_steps=total_steps)


def preset_3dgs_star(total_steps: int = 30000) -> ParamGroupConfig:
    base = ParamGroupConfig()
    return ParamGroupConfig(
        lrs={name: 5.0 * lr for name, lr in base.lrs.items()},
        means_lr_final=5.0 * base.means_lr_final,
        means_lr_steps=total_steps,
        means_decay=False,
        betas=(0.99, 0.999),
        eps=base.eps,
    )


PRESETS = {"3dgs": preset_3dgs, "3dgs-star": preset_3dgs_star}


def optimizer_preset(name: str, total_steps: int = 30000) -> ParamGroupConfig:
    try:
        return PRESETS[name](total_steps)
    except KeyError as exc:
        raise ConfigurationError(f"Unknown optimizer preset {name!r}; expected one of {sorted(PRESETS)}.") from exc


__all__ = [
    "GROUP_NAMES",
    "GROUP_SLICES",
    "ParamGroupConfig",
    "group_mask",
    "group_slices",
    "optimizer_preset",
    "preset_3dgs",
    "preset_3dgs_star",
    "update_norms",
]
