"""Hand-designed scene optimizers exposed to the harness."""
from __future__ import annotations

from typing import Optional

import numpy as np

from core.base_optimizer import BaseSceneOptimizer
from optim.adam import AdamState, adam_displacement
from optim.groups import ParamGroupConfig, group_mask, optimizer_preset
from scene.gaussians import GaussianCloud


class SGDOptimizer(BaseSceneOptimizer):
    def __init__(self, lr: float = 1e-3, frozen: tuple[str, ...] = ()) -> None:
        super().__init__("sgd", "Plain gradient descent with one learning rate.")
        self.lr = lr
        self.keep = ~group_mask(frozen)

    def reset(self, cloud: GaussianCloud) -> None:
        pass

    def propose(self, cloud: GaussianCloud, grads: np.ndarray, iteration: int) -> np.ndarray:
        return self.lr * np.asarray(grads, dtype=np.float64) * self.keep[None, :]


class AdamOptimizer(BaseSceneOptimizer):
    """Adam with the per-group learning rates of a preset."""

    def __init__(self, config: Optional[ParamGroupConfig] = None, preset: str = "3dgs", total_steps: int = 30000) -> None:
        super().__init__(f"adam-{preset}", f"Adam with the {preset} learning-rate table.")
        self.config = config or optimizer_preset(preset, total_steps)
        self.state: Optional[AdamState] = None

    def reset(self, cloud: GaussianCloud) -> None:
        self.state = AdamState.zeros(cloud.count)

    def propose(self, cloud: GaussianCloud, grads: np.ndarray, iteration: int) -> np.ndarray:
        if self.state is None:
            self.reset(cloud)
        displacement, self.state = adam_displacement(grads, self.state, self.config)
        return displacement


__all__ = ["AdamOptimizer", "SGDOptimizer"]
