"""Meta-training hyper-parameters and trainer presets."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Literal, Mapping, Optional

from core.errors import ConfigurationError

MetaStepMode = Literal["trajectory", "per_step"]
ViewPolicy = Literal["fixed", "fps"]


@dataclass(frozen=True, slots=True)
class MetaConfig:
    tau_max: int = 6
    p_buffer: float = 0.7
    p_push: float = 0.99
    p_push_back: float = 0.99
    buffer_capacity: int = 20
    tau_a_start: int = 1
    tau_a_end: int = 50
    tau_a_ramp: int = 10000
    meta_lr: float = 1e-4
    meta_betas: tuple[float, float] = (0.9, 0.999)
    meta_eps: float = 1e-8
    gamma: float = 0.9
    lvs_epsilon: float = 1e-8
    context_batch: int = 8
    target_views: int = 6
    view_policy: ViewPolicy = "fixed"
    pool_size: int = 64
    iterations: int = 3000
    meta_step_mode: MetaStepMode = "trajectory"
    fixed_tau: Optional[int] = None
    use_buffer: bool = True
    use_lvs: bool = True
    use_stability: bool = True
    lo_horizon: int = 100
    checkpoint_every: int = 100
    log_every: int = 10
    max_consecutive_failures: int = 5

    def __post_init__(self) -> None:
        for name in ("p_buffer", "p_push", "p_push_back", "gamma"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1].")
        for name in (
            "tau_max",
            "buffer_capacity",
            "tau_a_start",
            "tau_a_ramp",
            "context_batch",
            "target_views",
            "pool_size",
            "lo_horizon",
            "checkpoint_every",
            "log_every",
            "max_consecutive_failures",
        ):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1.")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be non-negative.")
        if self.tau_a_end < self.tau_a_start:
            raise ConfigurationError("tau_a_end must not be below tau_a_start.")
        if self.meta_lr <= 0:
            raise ConfigurationError("meta_lr must be positive.")
        if self.fixed_tau is not None and self.fixed_tau < 1:
            raise ConfigurationError("fixed_tau must be at least 1.")
        if self.meta_step_mode not in ("trajectory", "per_step"):
            raise ConfigurationError(f"Unknown meta_step_mode {self.meta_step_mode!r}.")
        if self.view_policy not in ("fixed", "fps"):
            raise ConfigurationError(f"Unknown view_policy {self.view_policy!r}.")

    def tau_a(self, meta_iter: int) -> int:
        """Rollout-length ceiling: floor of the linear ramp from ``tau_a_start`` to ``tau_a_end``."""
        progress = min(max(meta_iter, 0) / self.tau_a_ramp, 1.0)
        return int(math.floor(self.tau_a_start + (self.tau_a_end - self.tau_a_start) * progress))

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "MetaConfig":
        values = dict(values)
        preset = values.pop("preset", None)
        base = meta_preset(preset).as_dict() if preset else {}
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"Unknown meta settings: {unknown}")
        base.update(values)
        if "meta_betas" in base:
            base["meta_betas"] = tuple(base["meta_betas"])
        return cls(**base)


L2S_TRAINING = MetaConfig()
LO_BASELINE_TRAINING = MetaConfig(
    meta_step_mode="per_step",
    fixed_tau=24,
    use_buffer=False,
    use_lvs=False,
    use_stability=False,
)

META_PRESETS = {"l2s": L2S_TRAINING, "lo-baseline": LO_BASELINE_TRAINING}


def meta_preset(name: str) -> MetaConfig:
    try:
        return META_PRESETS[name]
    except KeyError as exc:
        raise ConfigurationError(f"Unknown meta preset {name!r}; expected one of {sorted(META_PRESETS)}.") from exc


__all__ = ["LO_BASELINE_TRAINING", "L2S_TRAINING", "META_PRESETS", "MetaConfig", "meta_preset"]
