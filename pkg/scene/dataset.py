"""Scene datasets and the spec used to synthesize them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from core.errors import ConfigurationError
from scene.camera import View
from scene.gaussians import GaussianCloud


@dataclass(slots=True)
class CameraArc:
    """Cameras evenly spaced in azimuth on a circle around the scene centre."""

    radius: float = 3.0
    elevation_deg: float = 20.0
    azimuth_span_deg: float = 360.0

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ConfigurationError("camera_arc.radius must be positive.")
        if not -80.0 <= self.elevation_deg <= 80.0:
            raise ConfigurationError("camera_arc.elevation_deg must lie in [-80, 80].")
        if not 0.0 < self.azimuth_span_deg <= 360.0:
            raise ConfigurationError("camera_arc.azimuth_span_deg must lie in (0, 360].")


@dataclass(slots=True)
class SceneSpec:
    n_gaussians: int = 50
    n_context: int = 8
    n_target: int = 4
    image_size: tuple[int, int] = (32, 32)  # (height, width)
    camera_arc: CameraArc = field(default_factory=CameraArc)
    extent: float = 1.0
    perturbation: float = 1.0
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    focal_scale: float = 1.0
    synthetic_sfm: bool = False
    quantize_images: bool = True

    def __post_init__(self) -> None:
        if isinstance(self.camera_arc, dict):
            self.camera_arc = CameraArc(**self.camera_arc)
        self.image_size = tuple(int(v) for v in self.image_size)
        self.background = tuple(float(v) for v in self.background)
        if self.n_gaussians < 1:
            raise ConfigurationError("n_gaussians must be at least 1.")
        if self.n_context < 1 or self.n_target < 1:
            raise ConfigurationError("A scene needs at least one context and one target view.")
        if len(self.image_size) != 2 or min(self.image_size) < 8:
            raise ConfigurationError("image_size must be at least 8 x 8.")
        if self.extent <= 0 or self.focal_scale <= 0:
            raise ConfigurationError("extent and focal_scale must be positive.")
        if self.perturbation < 0:
            raise ConfigurationError("perturbation must be non-negative.")
        if len(self.background) != 3:
            raise ConfigurationError("background must be an RGB triple.")
        # cameras must sit outside the sampled volume (half-diagonal of the cube)
        if self.camera_arc.radius <= self.extent * 0.8660254037844386:
            raise ConfigurationError("camera_arc.radius places cameras inside the scene volume.")


@dataclass(frozen=True, eq=False)
class SceneDataset:
    scene_id: str
    context_views: tuple[View, ...]
    target_views: tuple[View, ...]
    initial_cloud: GaussianCloud
    ground_truth: Optional[GaussianCloud] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "context_views", tuple(self.context_views))
        object.__setattr__(self, "target_views", tuple(self.target_views))
        if not self.context_views or not self.target_views:
            raise ConfigurationError(f"Scene {self.scene_id}: context and target sets must be non-empty.")
        context_ids = {id(view) for view in self.context_views}
        if any(id(view) in context_ids for view in self.target_views):
            raise ConfigurationError(f"Scene {self.scene_id}: context and target views must be disjoint.")
        context_names = {view.name for view in self.context_views}
        if any(view.name in context_names for view in self.target_views):
            raise ConfigurationError(f"Scene {self.scene_id}: view names overlap between context and target.")

    @property
    def views(self) -> tuple[View, ...]:
        return self.context_views + self.target_views

    def with_initial_cloud(self, cloud: GaussianCloud) -> "SceneDataset":
        return SceneDataset(self.scene_id, self.context_views, self.target_views, cloud, self.ground_truth)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SceneDataset):
            return NotImplemented
        return (
            self.scene_id == other.scene_id
            and self.context_views == other.context_views
            and self.target_views == other.target_views
            and self.initial_cloud == other.initial_cloud
            and self.ground_truth == other.ground_truth
        )

    __hash__ = object.__hash__


__all__ = ["CameraArc", "SceneDataset", "SceneSpec"]
