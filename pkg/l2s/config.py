"""Model dimensions of the learned optimizer."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping, Optional

from core.errors import ConfigurationError
from scene.gaussians import PARAM_COUNT

OUTPUT_WIDTH = PARAM_COUNT + 1
TIME_FEATURES = 12


@dataclass(frozen=True, slots=True)
class L2SConfig:
    state_dim: int = 256
    n_blocks: int = 4
    attn_dim: int = 192
    mlp_hidden: int = 1024
    k_neighbors: int = 4
    knn_refresh: int = 100
    knn_refresh_train: int = 1
    scale_hidden: Optional[int] = None
    include_self: bool = False
    lo_baseline: bool = False

    def __post_init__(self) -> None:
        if self.attn_dim % 3:
            raise ConfigurationError("attn_dim must be divisible by 3 (query, key, value).")
        for name in ("state_dim", "n_blocks", "attn_dim", "mlp_hidden", "k_neighbors", "knn_refresh", "knn_refresh_train"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1.")
        if self.scale_hidden is not None and self.scale_hidden < 1:
            raise ConfigurationError("scale_hidden must be at least 1.")

    @property
    def head_dim(self) -> int:
        return self.attn_dim // 3

    @property
    def input_dim(self) -> int:
        width = 2 * PARAM_COUNT + self.state_dim
        return width + TIME_FEATURES if self.lo_baseline else width

    @property
    def scale_hidden_dim(self) -> int:
        return self.scale_hidden or self.input_dim // 2

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "L2SConfig":
        values = dict(values)
        preset = values.pop("preset", None)
        base = model_preset(preset).as_dict() if preset else {}
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"Unknown model settings: {unknown}")
        base.update(values)
        if base.get("scale_hidden") == 0:
            base["scale_hidden"] = None
        for key in ("include_self", "lo_baseline"):
            if key in base:
                base[key] = bool(base[key])
        return cls(**base)


PAPER = L2SConfig()
DESK = L2SConfig(state_dim=32, n_blocks=2, attn_dim=24, mlp_hidden=128)

MODEL_PRESETS = {"paper": PAPER, "desk": DESK}


def model_preset(name: str) -> L2SConfig:
    try:
        return MODEL_PRESETS[name]
    except KeyError as exc:
        raise ConfigurationError(f"Unknown model preset {name!r}; expected one of {sorted(MODEL_PRESETS)}.") from exc


__all__ = ["DESK", "L2SConfig", "MODEL_PRESETS", "OUTPUT_WIDTH", "PAPER", "TIME_FEATURES", "model_preset"]
