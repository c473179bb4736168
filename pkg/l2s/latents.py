"""Per-Gaussian recurrent latent states."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from autodiff.tensor import Tensor2, default_dtype
from core.errors import ConfigurationError, ShapeError


@dataclass(eq=False)
class LatentStates:
    """``s`` is G x D; it carries graph history while a meta-training tape is live."""

    s: Tensor2

    @property
    def count(self) -> int:
        return self.s.rows

    @property
    def dim(self) -> int:
        return self.s.cols

    def numpy(self) -> np.ndarray:
        return self.s.numpy()

    def detach(self) -> "LatentStates":
        return LatentStates(self.s.detach())

    def mean_norm(self) -> float:
        return float(np.linalg.norm(self.s.data.astype(np.float64), axis=1).mean())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LatentStates):
            return NotImplemented
        return self.s.data.dtype == other.s.data.dtype and np.array_equal(self.s.data, other.s.data)

    __hash__ = object.__hash__


def init_latents(
    count: int,
    dim: int,
    seed: int,
    features: Optional[np.ndarray] = None,
    projection: Optional[np.ndarray] = None,
    dtype=None,
) -> LatentStates:
    """Standard-normal states, or a linear projection of per-Gaussian feature rows."""
    if count < 1 or dim < 1:
        raise ConfigurationError("Latent states need at least one row and one column.")
    dtype = dtype or default_dtype()
    rng = np.random.default_rng(seed)
    if features is None:
        return LatentStates(Tensor2(rng.standard_normal((count, dim)), dtype=dtype))
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != count:
        raise ShapeError("init_latents", features.shape, (count, -1))
    if projection is None:
        projection = rng.normal(0.0, np.sqrt(1.0 / features.shape[1]), size=(features.shape[1], dim))
    projection = np.asarray(projection, dtype=np.float64)
    if projection.shape != (features.shape[1], dim):
        raise ShapeError("init_latents", features.shape, projection.shape)
    return LatentStates(Tensor2(features @ projection, dtype=dtype))


__all__ = ["LatentStates", "init_latents"]
