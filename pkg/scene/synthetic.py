"""Procedurally generated scenes: a ground-truth cloud, an arc of cameras and a degraded start."""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from render.rasterizer import render
from render.settings import RenderSettings
from scene.camera import View, intrinsics_matrix, look_at
from scene.dataset import SceneDataset, SceneSpec
from scene.gaussians import (
    LOG_SCALE,
    MEAN,
    OPACITY,
    PARAM_COUNT,
    QUATERNION,
    SH_C0,
    SH_DC,
    SH_REST,
    GaussianCloud,
)
from scene.initialization import sfm_init
from utils.images import quantize_image

logger = logging.getLogger("L2S")

MEAN_NOISE = 0.02
MAX_ROTATION_DEG = 10.0
LOG_SCALE_JITTER = 0.2
COLOR_JITTER = 0.1


def sample_ground_truth(rng: np.random.Generator, spec: SceneSpec, dtype=np.float32) -> GaussianCloud:
    G = spec.n_gaussians
    params = np.zeros((G, PARAM_COUNT), dtype=np.float64)
    params[:, MEAN] = rng.uniform(-0.5, 0.5, size=(G, 3)) * spec.extent
    quats = rng.normal(size=(G, 4))
    params[:, QUATERNION] = quats / np.linalg.norm(quats, axis=1, keepdims=True)
    params[:, LOG_SCALE] = np.log(rng.uniform(0.06, 0.18, size=(G, 3)) * spec.extent)
    opacity = rng.uniform(0.5, 0.9, size=G)
    params[:, OPACITY] = np.log(opacity / (1.0 - opacity))[:, None]
    params[:, SH_DC] = (rng.uniform(0.1, 0.9, size=(G, 3)) - 0.5) / SH_C0
    params[:, SH_REST] = rng.normal(0.0, 0.05, size=(G, 45))
    return GaussianCloud(params.astype(dtype), copy=False)


def perturb_cloud(cloud: GaussianCloud, rng: np.random.Generator, magnitude: float, extent: float = 1.0) -> GaussianCloud:
    """Degrade a cloud: noisy means, small re-rotations, jittered scales and colours."""
    if magnitude == 0:
        return cloud
    params = cloud.params.astype(np.float64)
    G = params.shape[0]
    params[:, MEAN] += rng.normal(0.0, MEAN_NOISE * extent * magnitude, size=(G, 3))

    axes = rng.normal(size=(G, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = np.deg2rad(rng.uniform(0.0, MAX_ROTATION_DEG * magnitude, size=G))
    wxyz = params[:, QUATERNION] / np.linalg.norm(params[:, QUATERNION], axis=1, keepdims=True)
    rotated = Rotation.from_rotvec(axes * angles[:, None]) * Rotation.from_quat(wxyz[:, [1, 2, 3, 0]])
    params[:, QUATERNION] = rotated.as_quat()[:, [3, 0, 1, 2]]

    params[:, LOG_SCALE] += rng.uniform(-LOG_SCALE_JITTER, LOG_SCALE_JITTER, size=(G, 3)) * magnitude
    params[:, SH_DC] += rng.uniform(-COLOR_JITTER, COLOR_JITTER, size=(G, 3)) * magnitude / SH_C0
    return GaussianCloud(params.astype(cloud.dtype), copy=False)


def arc_cameras(spec: SceneSpec) -> list[tuple[np.ndarray, np.ndarray, np.ndarray, str]]:
    """(intrinsics, rotation, centre, name) per camera; roles are assigned by the caller."""
    arc = spec.camera_arc
    total = spec.n_context + spec.n_target
    if arc.azimuth_span_deg >= 360.0:
        azimuths = np.deg2rad(360.0 * np.arange(total) / total)
    else:
        half = 0.5 * arc.azimuth_span_deg
        azimuths = np.deg2rad(np.linspace(-half, half, total))
    elevation = np.deg2rad(arc.elevation_deg)
    H, W = spec.image_size
    K = intrinsics_matrix(spec.focal_scale * W, spec.focal_scale * W, W / 2.0, H / 2.0)
    cameras = []
    for i, azimuth in enumerate(azimuths):
        center = arc.radius * np.array(
            [np.cos(elevation) * np.cos(azimuth), np.cos(elevation) * np.sin(azimuth), np.sin(elevation)]
        )
        cameras.append((K, look_at(center, np.zeros(3)), center, f"view_{i:03d}"))
    return cameras


def generate_synthetic_scene(
    seed: int,
    spec: Optional[SceneSpec] = None,
    scene_id: Optional[str] = None,
) -> SceneDataset:
    spec = spec or SceneSpec()
    rng = np.random.default_rng(seed)
    ground_truth = sample_ground_truth(rng, spec)
    cameras = arc_cameras(spec)
    target_ids = set(int(i) for i in rng.permutation(len(cameras))[: spec.n_target])
    settings = RenderSettings(background=spec.background)

    context, target = [], []
    H, W = spec.image_size
    for i, (K, R, center, name) in enumerate(cameras):
        role = "target" if i in target_ids else "context"
        blank = View(K, R, center, np.zeros((H, W, 3), dtype=np.float32), role, name)
        image = render(ground_truth, blank, settings).rgb
        if spec.quantize_images:
            image = quantize_image(image)
        (target if role == "target" else context).append(blank.with_image(image))

    if spec.synthetic_sfm:
        noise = rng.normal(0.0, MEAN_NOISE * spec.extent * spec.perturbation, size=(spec.n_gaussians, 3))
        colors = np.clip(ground_truth.dc_colors().astype(np.float64), 0.0, 1.0)
        initial = sfm_init(ground_truth.means.astype(np.float64) + noise, colors)
    else:
        initial = perturb_cloud(ground_truth, rng, spec.perturbation, spec.extent)

    scene_id = scene_id or f"synthetic_{seed:06d}"
    logger.debug("Generated scene %s with %d Gaussians and %d views.", scene_id, spec.n_gaussians, len(cameras))
    return SceneDataset(scene_id, context, target, initial, ground_truth)


__all__ = ["arc_cameras", "generate_synthetic_scene", "perturb_cloud", "sample_ground_truth"]
