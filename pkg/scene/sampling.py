"""Point filtering, point subsampling and view selection."""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from core.errors import ConfigurationError, EmptyCloudError
from scene.camera import View
from scene.gaussians import GaussianCloud

logger = logging.getLogger("L2S")

DEFAULT_BLACK_THRESHOLD = 1e-3


def filter_black_points(cloud: GaussianCloud, threshold: float = DEFAULT_BLACK_THRESHOLD) -> GaussianCloud:
    """Drop Gaussians whose DC colour is below ``threshold`` on every channel."""
    if threshold < 0:
        raise ConfigurationError("threshold must be non-negative.")
    colors = cloud.dc_colors().astype(np.float64)
    keep = ~(colors < threshold).all(axis=1)
    if not keep.any():
        raise EmptyCloudError("Every Gaussian is black; nothing left to optimize.")
    if keep.all():
        return cloud
    logger.debug("Filtered %d black points.", int((~keep).sum()))
    return cloud.subset(np.flatnonzero(keep))


def subsample_points(cloud: GaussianCloud, keep_fraction: float, seed: int) -> GaussianCloud:
    if not 0.1 <= keep_fraction <= 1.0:
        raise ConfigurationError("keep_fraction must lie in [0.1, 1.0].")
    G = cloud.count
    n_keep = max(1, int(round(G * keep_fraction)))
    if n_keep >= G:
        return cloud
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(G, size=n_keep, replace=False))
    return cloud.subset(chosen)


def fps_indices(centers: np.ndarray, count: int, first: int) -> list[int]:
    """Greedy max-min-distance order starting from ``first``; ties go to the lower index."""
    centers = np.asarray(centers, dtype=np.float64)
    picks = [first]
    nearest = np.linalg.norm(centers - centers[first], axis=1)
    nearest[first] = -1.0
    for _ in range(count - 1):
        candidate = int(np.argmax(nearest))
        picks.append(candidate)
        nearest = np.minimum(nearest, np.linalg.norm(centers - centers[candidate], axis=1))
        nearest[picks] = -1.0
    return picks


def select_views_fps(
    views: Sequence[View],
    count: int,
    seed: Optional[int] = None,
    first_index: Optional[int] = None,
) -> list[View]:
    """Furthest-point sampling on camera centres, returned in pick order."""
    if not 1 <= count <= len(views):
        raise ConfigurationError(f"Cannot select {count} of {len(views)} views.")
    if first_index is None:
        first_index = int(np.random.default_rng(seed).integers(len(views)))
    centers = np.stack([view.center for view in views])
    return [views[i] for i in fps_indices(centers, count, first_index)]


__all__ = ["filter_black_points", "fps_indices", "select_views_fps", "subsample_points"]
