"""Expanding bare point clouds into Gaussians."""
from __future__ import annotations

import numpy as np

from core.errors import EmptyCloudError, NumericalError, ShapeError
from scene.gaussians import (
    LOG_SCALE,
    MEAN,
    OPACITY,
    PARAM_COUNT,
    QUATERNION,
    SH_DC,
    GaussianCloud,
    logit,
    rgb_to_sh_dc,
)
from spatial.knn import build_knn

INITIAL_OPACITY = 0.1
SINGLE_POINT_SCALE = 0.01
MIN_NEIGHBOR_DISTANCE = 1e-7


def sfm_init(points: np.ndarray, colors: np.ndarray, dtype=np.float32) -> GaussianCloud:
    """Isotropic Gaussians at ``points`` sized by the mean distance to their 3 nearest points."""
    points = np.asarray(points, dtype=np.float64)
    colors = np.asarray(colors, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ShapeError("sfm_init", points.shape, (-1, 3))
    if colors.shape != points.shape:
        raise ShapeError("sfm_init", points.shape, colors.shape)
    if points.shape[0] == 0:
        raise EmptyCloudError("Cannot initialize Gaussians from an empty point cloud.")
    if not (np.isfinite(points).all() and np.isfinite(colors).all()):
        raise NumericalError("Point cloud contains non-finite values")

    G = points.shape[0]
    if G == 1:
        distance = np.full(1, SINGLE_POINT_SCALE)
    else:
        neighbors = build_knn(points, 3).indices
        offsets = points[neighbors] - points[:, None, :]
        distance = np.sqrt((offsets * offsets).sum(axis=2)).mean(axis=1)
        distance = np.maximum(distance, MIN_NEIGHBOR_DISTANCE)

    params = np.zeros((G, PARAM_COUNT), dtype=np.float64)
    params[:, MEAN] = points
    params[:, QUATERNION] = (1.0, 0.0, 0.0, 0.0)
    params[:, LOG_SCALE] = np.log(distance)[:, None]
    params[:, OPACITY] = logit(INITIAL_OPACITY)
    params[:, SH_DC] = rgb_to_sh_dc(colors)
    return GaussianCloud(params.astype(dtype), copy=False)


__all__ = ["INITIAL_OPACITY", "sfm_init"]
