"""Shared builders for the test-suite: micro-scenes, random clouds and gradient checks."""
from __future__ import annotations

import dataclasses
from typing import Callable, Optional

import numpy as np

from l2s.config import L2SConfig
from scene.camera import View, intrinsics_matrix, look_at
from scene.dataset import CameraArc, SceneDataset, SceneSpec
from scene.gaussians import LOG_SCALE, MEAN, OPACITY, PARAM_COUNT, QUATERNION, SH_DC, SH_REST, GaussianCloud
from scene.synthetic import generate_synthetic_scene


def random_cloud(rng: np.random.Generator, count: int, dtype=np.float64, spread: float = 0.3) -> GaussianCloud:
    """Gaussians near the origin, small enough to stay inside a 16 x 16 frame."""
    params = np.zeros((count, PARAM_COUNT))
    params[:, MEAN] = rng.uniform(-spread, spread, size=(count, 3))
    params[:, QUATERNION] = rng.normal(size=(count, 4))
    params[:, LOG_SCALE] = np.log(rng.uniform(0.08, 0.2, size=(count, 3)))
    params[:, OPACITY] = rng.uniform(-0.5, 1.5, size=(count, 1))
    params[:, SH_DC] = rng.normal(0.0, 0.5, size=(count, 3))
    params[:, SH_REST] = rng.normal(0.0, 0.1, size=(count, 45))
    return GaussianCloud(params.astype(dtype), copy=False)


def front_view(
    size: int = 16,
    distance: float = 2.0,
    focal: Optional[float] = None,
    name: str = "front",
    role: str = "context",
    image: Optional[np.ndarray] = None,
    eye=None,
) -> View:
    """Camera on the -y axis looking at the origin, z up."""
    focal = focal if focal is not None else 2.0 * size
    eye = np.asarray(eye if eye is not None else (0.0, -distance, 0.0), dtype=np.float64)
    K = intrinsics_matrix(focal, focal, size / 2.0, size / 2.0)
    if image is None:
        image = np.zeros((size, size, 3), dtype=np.float32)
    return View(K, look_at(eye, np.zeros(3)), eye, image, role, name)


def micro_spec(n_gaussians: int = 3, size: int = 16, n_context: int = 2, n_target: int = 1, **changes) -> SceneSpec:
    values = dict(
        n_gaussians=n_gaussians,
        n_context=n_context,
        n_target=n_target,
        image_size=(size, size),
        camera_arc=CameraArc(radius=2.0, elevation_deg=15.0),
        focal_scale=1.5,
        quantize_images=False,
    )
    values.update(changes)
    return SceneSpec(**values)


def micro_scene(seed: int = 0, dtype=np.float64, **spec_changes) -> SceneDataset:
    """A synthetic scene small enough for finite-difference checks."""
    scene = generate_synthetic_scene(seed, micro_spec(**spec_changes))
    return scene.with_initial_cloud(scene.initial_cloud.astype(dtype))


def tiny_config(**changes) -> L2SConfig:
    base = L2SConfig(state_dim=8, n_blocks=1, attn_dim=6, mlp_hidden=16, k_neighbors=2)
    return dataclasses.replace(base, **changes)


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Numerical gradient of scalar ``f`` at ``x`` (every entry)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + h
        plus = f(x)
        x[index] = original - h
        minus = f(x)
        x[index] = original
        grad[index] = (plus - minus) / (2.0 * h)
    return grad


def gradient_mismatch(analytic: np.ndarray, numeric: np.ndarray, rtol: float = 1e-3, atol: float = 1e-6) -> np.ndarray:
    """Indices where ``|analytic - numeric| > rtol * |numeric| + atol``."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    return np.argwhere(np.abs(analytic - numeric) > rtol * np.abs(numeric) + atol)


__all__ = [
    "central_difference",
    "front_view",
    "gradient_mismatch",
    "micro_scene",
    "micro_spec",
    "random_cloud",
    "tiny_config",
]
