"""Differentiable Gaussian splatting renderer."""
from render.projection import ProjectedGaussian, project_gaussians
from render.rasterizer import (
    GradientBatch,
    RenderStats,
    RenderedImage,
    render,
    render_backward,
    render_batch,
    render_batch_backward,
    render_naive,
    render_with_stats,
)
from render.settings import DEFAULT_SETTINGS, FP64_SETTINGS, RenderSettings
from render.sh import evaluate_sh

__all__ = [
    "DEFAULT_SETTINGS",
    "FP64_SETTINGS",
    "GradientBatch",
    "ProjectedGaussian",
    "RenderSettings",
    "RenderStats",
    "RenderedImage",
    "evaluate_sh",
    "project_gaussians",
    "render",
    "render_backward",
    "render_batch",
    "render_batch_backward",
    "render_naive",
    "render_with_stats",
]
