"""Image and meta-training losses."""
from losses.image import d_ssim, inner_loss, l1, psnr, ssim
from losses.meta import low_visibility_loss, meta_loss, render_loss, stability_loss
from losses.report import ImageLoss, LossReport
from losses.scene import SceneGradient, scene_gradient

__all__ = [
    "ImageLoss",
    "LossReport",
    "SceneGradient",
    "d_ssim",
    "inner_loss",
    "l1",
    "low_visibility_loss",
    "meta_loss",
    "psnr",
    "render_loss",
    "scene_gradient",
    "ssim",
    "stability_loss",
]
