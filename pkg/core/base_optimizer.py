from __future__ import annotations

from typing import Optional

import numpy as np

from scene.gaussians import GaussianCloud


class BaseSceneOptimizer:
    """
    Base class for per-scene optimizers driven by the harness.

    An optimizer proposes a displacement ``delta`` for the current cloud from
    its rendering gradient; the caller applies ``cloud - delta``. Keeping the
    application outside lets the harness freeze or swap parameter groups.
    """

    def __init__(self, name: Optional[str] = None, description: Optional[str] = None):
        self.name = name or self.__class__.__name__
        self.description = description or "No description provided."

    def reset(self, cloud: GaussianCloud) -> None:
        """Prepare fresh per-scene state for ``cloud``."""
        raise NotImplementedError

    def propose(self, cloud: GaussianCloud, grads: np.ndarray, iteration: int) -> np.ndarray:
        """Advance internal state and return the G x 59 displacement."""
        raise NotImplementedError

    def diagnostics(self) -> dict[str, float]:
        """Extra per-iteration figures for the metrics CSV."""
        return {}


__all__ = ["BaseSceneOptimizer"]
