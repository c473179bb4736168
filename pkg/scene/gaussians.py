"""Gaussian primitives and the G x 59 parameter matrix they flatten into."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from core.errors import EmptyCloudError, NumericalError, ShapeError

PARAM_COUNT = 59
SH_COEFFS = 16
SH_C0 = 0.28209479177387814

MEAN = slice(0, 3)
QUATERNION = slice(3, 7)
LOG_SCALE = slice(7, 10)
OPACITY = slice(10, 11)
SH = slice(11, 59)
SH_DC = slice(11, 14)
SH_REST = slice(14, 59)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


def rgb_to_sh_dc(rgb):
    """Inverse of the DC colour mapping ``C0 * dc + 0.5``."""
    return (np.asarray(rgb) - 0.5) / SH_C0


def sh_dc_to_rgb(dc):
    return SH_C0 * np.asarray(dc) + 0.5


@dataclass(frozen=True, eq=False)
class Gaussian:
    """One primitive in unconstrained parameter space."""

    mean: np.ndarray
    quaternion: np.ndarray  # (w, x, y, z)
    log_scale: np.ndarray
    opacity_logit: float
    sh: np.ndarray  # 16 x 3

    @property
    def opacity(self) -> float:
        return float(sigmoid(self.opacity_logit))

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale)

    @property
    def unit_quaternion(self) -> np.ndarray:
        return self.quaternion / np.linalg.norm(self.quaternion)

    def to_vector(self, dtype=np.float32) -> np.ndarray:
        out = np.empty(PARAM_COUNT, dtype=dtype)
        out[MEAN] = self.mean
        out[QUATERNION] = self.quaternion
        out[LOG_SCALE] = self.log_scale
        out[OPACITY] = self.opacity_logit
        out[SH] = np.asarray(self.sh).reshape(-1)
        return out

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "Gaussian":
        vector = np.asarray(vector)
        if vector.shape != (PARAM_COUNT,):
            raise ShapeError("Gaussian.from_vector", vector.shape, (PARAM_COUNT,))
        return cls(
            mean=vector[MEAN].copy(),
            quaternion=vector[QUATERNION].copy(),
            log_scale=vector[LOG_SCALE].copy(),
            opacity_logit=vector[OPACITY][0],
            sh=vector[SH].reshape(SH_COEFFS, 3).copy(),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Gaussian):
            return NotImplemented
        return np.array_equal(self.to_vector(np.float64), other.to_vector(np.float64))


class GaussianCloud:
    """Immutable ordered set of Gaussians stored as a G x 59 matrix."""

    __slots__ = ("_params",)

    def __init__(self, params: np.ndarray, *, copy: bool = True) -> None:
        params = np.array(params, copy=copy)
        if params.ndim != 2 or params.shape[1] != PARAM_COUNT:
            raise ShapeError("GaussianCloud", params.shape, (-1, PARAM_COUNT))
        if params.shape[0] < 1:
            raise EmptyCloudError("A Gaussian cloud needs at least one primitive.")
        if params.dtype not in (np.float32, np.float64):
            params = params.astype(np.float32)
        params.setflags(write=False)
        self._params = params

    @classmethod
    def from_gaussians(cls, gaussians: Iterable[Gaussian], dtype=np.float32) -> "GaussianCloud":
        rows = [g.to_vector(dtype) for g in gaussians]
        if not rows:
            raise EmptyCloudError("A Gaussian cloud needs at least one primitive.")
        return cls(np.stack(rows), copy=False)

    @property
    def params(self) -> np.ndarray:
        return self._params

    def as_matrix(self) -> np.ndarray:
        return self._params

    @property
    def gaussians(self) -> list[Gaussian]:
        return [Gaussian.from_vector(row) for row in self._params]

    @property
    def count(self) -> int:
        return self._params.shape[0]

    def __len__(self) -> int:
        return self._params.shape[0]

    @property
    def dtype(self) -> np.dtype:
        return self._params.dtype

    @property
    def means(self) -> np.ndarray:
        return self._params[:, MEAN]

    @property
    def quaternions(self) -> np.ndarray:
        return self._params[:, QUATERNION]

    @property
    def log_scales(self) -> np.ndarray:
        return self._params[:, LOG_SCALE]

    @property
    def opacity_logits(self) -> np.ndarray:
        return self._params[:, OPACITY][:, 0]

    @property
    def sh(self) -> np.ndarray:
        return self._params[:, SH].reshape(-1, SH_COEFFS, 3)

    def dc_colors(self) -> np.ndarray:
        return sh_dc_to_rgb(self._params[:, SH_DC])

    def astype(self, dtype) -> "GaussianCloud":
        if self._params.dtype == dtype:
            return self
        return GaussianCloud(self._params.astype(dtype), copy=False)

    def with_params(self, params: np.ndarray) -> "GaussianCloud":
        params = np.asarray(params)
        if params.shape != self._params.shape:
            raise ShapeError("GaussianCloud.with_params", params.shape, self._params.shape)
        return GaussianCloud(params.astype(self._params.dtype, copy=True), copy=False)

    def subset(self, indices: Sequence[int] | np.ndarray) -> "GaussianCloud":
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            raise EmptyCloudError("Subset would leave the cloud empty.")
        return GaussianCloud(self._params[indices], copy=True)

    def check_finite(self) -> None:
        """Raise :class:`NumericalError` naming the first non-finite Gaussian."""
        bad_rows = ~np.isfinite(self._params).all(axis=1)
        if bad_rows.any():
            index = int(np.flatnonzero(bad_rows)[0])
            raise NumericalError("Non-finite Gaussian parameters", gaussian_index=index)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GaussianCloud):
            return NotImplemented
        return self._params.dtype == other._params.dtype and np.array_equal(self._params, other._params)

    def __repr__(self) -> str:
        return f"GaussianCloud(G={self.count}, dtype={self.dtype})"


__all__ = [
    "Gaussian",
    "GaussianCloud",
    "LOG_SCALE",
    "MEAN",
    "OPACITY",
    "PARAM_COUNT",
    "QUATERNION",
    "SH",
    "SH_C0",
    "SH_COEFFS",
    "SH_DC",
    "SH_REST",
    "logit",
    "rgb_to_sh_dc",
    "sh_dc_to_rgb",
    "sigmoid",
]
