"""Evaluation of a cloud against the context and target views of a scene."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from losses.image import PSNR_CAP, psnr, ssim
from render.rasterizer import render
from render.settings import RenderSettings
from scene.camera import View
from scene.dataset import SceneDataset
from scene.gaussians import GaussianCloud


@dataclass(frozen=True, slots=True)
class ViewSetScore:
    psnr: float
    ssim: float


@dataclass(frozen=True, slots=True)
class SceneScore:
    context: ViewSetScore
    target: ViewSetScore

    def as_row(self) -> dict[str, float]:
        return {
            "psnr_context": self.context.psnr,
            "psnr_target": self.target.psnr,
            "ssim_context": self.context.ssim,
            "ssim_target": self.target.ssim,
        }


def score_views(
    cloud: GaussianCloud,
    views: Sequence[View],
    settings: Optional[RenderSettings] = None,
    cap: float = PSNR_CAP,
) -> ViewSetScore:
    """Mean PSNR (capped) and SSIM over ``views``."""
    psnrs, ssims = [], []
    for view in views:
        rgb = render(cloud, view, settings).rgb
        psnrs.append(psnr(view.image, rgb, cap))
        ssims.append(ssim(view.image, rgb))
    return ViewSetScore(float(np.mean(psnrs)), float(np.mean(ssims)))


def score_scene(
    cloud: GaussianCloud, scene: SceneDataset, settings: Optional[RenderSettings] = None, cap: float = PSNR_CAP
) -> SceneScore:
    return SceneScore(
        score_views(cloud, scene.context_views, settings, cap),
        score_views(cloud, scene.target_views, settings, cap),
    )


__all__ = ["SceneScore", "ViewSetScore", "score_scene", "score_views"]
