"""Sources of training scenes for the meta loop."""
from __future__ import annotations

import logging
import pathlib
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from core.errors import ConfigurationError
from scene.dataset import SceneDataset, SceneSpec
from scene.io import SCENE_FILE, load_scene
from scene.synthetic import generate_synthetic_scene

logger = logging.getLogger("L2S")


class ScenePool(Protocol):
    def __len__(self) -> int: ...

    def sample(self, rng: np.random.Generator) -> SceneDataset: ...


class ListScenePool:
    def __init__(self, scenes: Sequence[SceneDataset]) -> None:
        if not scenes:
            raise ConfigurationError("The training scene pool is empty.")
        self.scenes = list(scenes)

    def __len__(self) -> int:
        return len(self.scenes)

    def sample(self, rng: np.random.Generator) -> SceneDataset:
        return self.scenes[int(rng.integers(len(self.scenes)))]


class SyntheticScenePool:
    """``count`` synthetic scenes with seeds ``base_seed .. base_seed + count - 1``, generated on first use."""

    def __init__(self, spec: SceneSpec, count: int, base_seed: int = 0) -> None:
        if count < 1:
            raise ConfigurationError("The training scene pool is empty.")
        self.spec = spec
        self.count = count
        self.base_seed = base_seed
        self._scene = lru_cache(maxsize=256)(self._generate)

    def _generate(self, seed: int) -> SceneDataset:
        return generate_synthetic_scene(seed, self.spec)

    def __len__(self) -> int:
        return self.count

    def sample(self, rng: np.random.Generator) -> SceneDataset:
        return self._scene(self.base_seed + int(rng.integers(self.count)))


class DirectoryScenePool(ListScenePool):
    """Every scene container found directly below ``root`` (or ``root`` itself)."""

    def __init__(self, root: pathlib.Path | str) -> None:
        root = pathlib.Path(root)
        if (root / SCENE_FILE).is_file():
            directories = [root]
        else:
            directories = sorted(p for p in root.iterdir() if (p / SCENE_FILE).is_file()) if root.is_dir() else []
        if not directories:
            raise ConfigurationError(f"No scene containers found under {root}.")
        logger.info("Loading %d training scenes from %s", len(directories), root)
        super().__init__([load_scene(directory) for directory in directories])


__all__ = ["DirectoryScenePool", "ListScenePool", "ScenePool", "SyntheticScenePool"]
