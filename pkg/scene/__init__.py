"""Scene primitives: Gaussians, cameras, datasets and their file formats."""
from scene.camera import View, look_at
from scene.dataset import CameraArc, SceneDataset, SceneSpec
from scene.gaussians import PARAM_COUNT, Gaussian, GaussianCloud

__all__ = ["CameraArc", "Gaussian", "GaussianCloud", "PARAM_COUNT", "SceneDataset", "SceneSpec", "View", "look_at"]
