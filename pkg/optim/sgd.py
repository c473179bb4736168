"""Plain gradient descent on the cloud parameters."""
from __future__ import annotations

import numpy as np

from scene.gaussians import GaussianCloud


def sgd_step(cloud: GaussianCloud, grads: np.ndarray, lr: float) -> GaussianCloud:
    return cloud.with_params(cloud.params - lr * np.asarray(grads))


__all__ = ["sgd_step"]
