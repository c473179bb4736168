"""Knobs shared by the forward and backward rasterizer."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from core.errors import ConfigurationError


@dataclass(frozen=True, slots=True)
class RenderSettings:
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    near: float = 0.01
    low_pass: float = 0.3
    alpha_max: float = 0.999
    alpha_min: float = 1.0 / 255.0
    transmittance_min: float = 1e-4
    guard_band: float = 0.5
    tile_size: int = 16
    dtype: str = "float32"
    threads: int = 1
    stats: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.near <= 0:
            raise ConfigurationError("near must be positive.")
        if self.tile_size < 1:
            raise ConfigurationError("tile_size must be at least 1.")
        if self.dtype not in ("float32", "float64"):
            raise ConfigurationError(f"Unsupported render dtype {self.dtype!r}.")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1.")
        if len(self.background) != 3:
            raise ConfigurationError("background must be an RGB triple.")
        if self.guard_band < 0:
            raise ConfigurationError("guard_band must be non-negative.")

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    def replace(self, **changes) -> "RenderSettings":
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return RenderSettings(**values)


DEFAULT_SETTINGS = RenderSettings()
FP64_SETTINGS = RenderSettings(dtype="float64")

__all__ = ["DEFAULT_SETTINGS", "FP64_SETTINGS", "RenderSettings"]
