"""Posed pinhole cameras with reference images."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from core.errors import ConfigurationError

ViewRole = Literal["context", "target"]
_ORTHONORMAL_TOL = 1e-6


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """World-to-camera rotation for a camera at ``eye`` looking at ``target``.

    Camera axes follow the OpenCV convention: x right, y down, z forward.
    """
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    norm = np.linalg.norm(right)
    if norm < 1e-9:
        raise ConfigurationError("Camera up vector is parallel to the viewing direction.")
    right /= norm
    down = np.cross(forward, right)
    return np.stack([right, down, forward])


def intrinsics_matrix(fx: float, fy: float, cx: float, cy: float, skew: float = 0.0) -> np.ndarray:
    return np.array([[fx, skew, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class View:
    """A camera (``mu = R (p - t)``) together with its reference image."""

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    image: np.ndarray
    role: ViewRole = "context"
    name: str = "view"
    allow_skew: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        K = np.array(self.intrinsics, dtype=np.float64)
        R = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        image = np.asarray(self.image, dtype=np.float32)
        if K.shape != (3, 3) or R.shape != (3, 3):
            raise ConfigurationError(f"View {self.name}: intrinsics and rotation must be 3x3.")
        if image.ndim != 3 or image.shape[2] != 3:
            raise ConfigurationError(f"View {self.name}: image must be H x W x 3, got {image.shape}.")
        if not (np.isfinite(K).all() and np.isfinite(R).all() and np.isfinite(t).all()):
            raise ConfigurationError(f"View {self.name}: camera parameters must be finite.")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ConfigurationError(f"View {self.name}: focal lengths must be positive.")
        if K[0, 1] != 0 and not self.allow_skew:
            raise ConfigurationError(f"View {self.name}: skew is only allowed when configured.")
        if np.abs(R @ R.T - np.eye(3)).max() > _ORTHONORMAL_TOL or abs(np.linalg.det(R) - 1.0) > _ORTHONORMAL_TOL:
            raise ConfigurationError(f"View {self.name}: rotation must be orthonormal with det +1.")
        if self.role not in ("context", "target"):
            raise ConfigurationError(f"View {self.name}: unknown role {self.role!r}.")
        for array in (K, R, t, image):
            array.setflags(write=False)
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "image", image)

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return self.translation

    def with_image(self, image: np.ndarray) -> "View":
        return View(self.intrinsics, self.rotation, self.translation, image, self.role, self.name, self.allow_skew)

    def with_role(self, role: ViewRole) -> "View":
        return View(self.intrinsics, self.rotation, self.translation, self.image, role, self.name, self.allow_skew)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, View):
            return NotImplemented
        return (
            self.role == other.role
            and self.name == other.name
            and np.array_equal(self.intrinsics, other.intrinsics)
            and np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
            and np.array_equal(self.image, other.image)
        )

    __hash__ = object.__hash__


__all__ = ["View", "ViewRole", "intrinsics_matrix", "look_at"]
