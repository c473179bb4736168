"""Checkpoint buffer of partially optimized scenes."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Generic, Iterator, Optional, Protocol, TypeVar

import numpy as np

from core.errors import ConfigurationError, NumericalError
from l2s.latents import LatentStates
from optim.adam import AdamState
from scene.dataset import SceneDataset
from scene.gaussians import GaussianCloud

logger = logging.getLogger("L2S")


class HasInnerStep(Protocol):
    inner_step_count: int


T = TypeVar("T", bound=HasInnerStep)


@dataclass(eq=False)
class Checkpoint:
    """A scene mid-optimization: everything needed to resume its inner loop."""

    scene_id: str
    cloud: GaussianCloud
    latents: LatentStates
    shadow_adam: AdamState
    inner_step_count: int
    scene: Optional[SceneDataset] = None

    def __post_init__(self) -> None:
        if self.inner_step_count < 1:
            raise ConfigurationError("A stored checkpoint must have taken at least one inner step.")
        if self.latents.count != self.cloud.count or self.shadow_adam.m.shape[0] != self.cloud.count:
            raise ConfigurationError(f"Checkpoint {self.scene_id}: state rows do not match the cloud.")
        self.cloud.check_finite()
        for name, array in (("latents", self.latents.numpy()), ("adam.m", self.shadow_adam.m), ("adam.v", self.shadow_adam.v)):
            if not np.isfinite(array).all():
                raise NumericalError("Non-finite checkpoint state", scene_id=self.scene_id, tensor=name)


class CheckpointBuffer(Generic[T]):
    """FIFO store of at most ``capacity`` entries; sampling removes the entry."""

    def __init__(self, capacity: int = 20) -> None:
        if capacity < 1:
            raise ConfigurationError("Buffer capacity must be at least 1.")
        self.capacity = capacity
        self._entries: deque[T] = deque()

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[T]:
        return iter(self._entries)

    @property
    def is_full(self) -> bool:
        return len(self._entries) >= self.capacity

    def push(self, entry: T) -> Optional[T]:
        """Append ``entry``; returns the evicted oldest entry when the buffer was full."""
        evicted = self._entries.popleft() if self.is_full else None
        self._entries.append(entry)
        if evicted is not None:
            logger.debug("Buffer evicted an entry at inner step %d", evicted.inner_step_count)
        return evicted

    def pop_sample(self, rng: np.random.Generator) -> T:
        if not self._entries:
            raise ConfigurationError("Cannot sample from an empty checkpoint buffer.")
        index = int(rng.integers(len(self._entries)))
        entry = self._entries[index]
        del self._entries[index]
        return entry

    def clear(self) -> None:
        self._entries.clear()


__all__ = ["Checkpoint", "CheckpointBuffer"]
