"""Inner-loop loss of a cloud over a batch of views, with its parameter gradient."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from core.errors import ConfigurationError, NumericalError
from losses.image import PerceptualLoss, inner_loss
from render.rasterizer import render, render_batch_backward
from render.settings import RenderSettings
from scene.camera import View
from scene.gaussians import GaussianCloud


@dataclass(frozen=True, eq=False)
class SceneGradient:
    loss: float
    grads: np.ndarray  # G x 59, d mean-loss / d params
    renders: tuple[np.ndarray, ...]


def scene_gradient(
    cloud: GaussianCloud,
    views: Sequence[View],
    settings: Optional[RenderSettings] = None,
    perceptual: Optional[PerceptualLoss] = None,
) -> SceneGradient:
    """Mean of ``0.8 l1 + 0.2 D-SSIM`` over ``views`` and its gradient."""
    if not views:
        raise ConfigurationError("scene_gradient needs at least one view.")
    renders, upstreams, total = [], [], 0.0
    for view in views:
        rgb = render(cloud, view, settings).rgb
        report = inner_loss(view.image, rgb, perceptual)
        renders.append(rgb)
        upstreams.append(report.grad)
        total += report.value
    loss = total / len(views)
    if not math.isfinite(loss):
        raise NumericalError("Inner loss is not finite", views=len(views))
    grads = render_batch_backward(cloud, views, upstreams, settings).grads
    return SceneGradient(loss, grads, tuple(renders))


__all__ = ["SceneGradient", "scene_gradient"]
