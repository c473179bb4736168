"""Real spherical-harmonics basis up to degree 3 and its direction gradient."""
from __future__ import annotations

import numpy as np

from core.errors import ConfigurationError

C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)

SH_OFFSET = 0.5


def sh_basis(dirs: np.ndarray) -> np.ndarray:
    """Evaluate the 16 basis functions at unit directions (N x 3 -> N x 16)."""
    dirs = np.asarray(dirs)
    dtype = dirs.dtype.type
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z
    out = np.empty((dirs.shape[0], 16), dtype=dirs.dtype)
    out[:, 0] = dtype(C0)
    out[:, 1] = -dtype(C1) * y
    out[:, 2] = dtype(C1) * z
    out[:, 3] = -dtype(C1) * x
    out[:, 4] = dtype(C2[0]) * xy
    out[:, 5] = dtype(C2[1]) * yz
    out[:, 6] = dtype(C2[2]) * (dtype(2.0) * zz - xx - yy)
    out[:, 7] = dtype(C2[3]) * xz
    out[:, 8] = dtype(C2[4]) * (xx - yy)
    out[:, 9] = dtype(C3[0]) * y * (dtype(3.0) * xx - yy)
    out[:, 10] = dtype(C3[1]) * xy * z
    out[:, 11] = dtype(C3[2]) * y * (dtype(4.0) * zz - xx - yy)
    out[:, 12] = dtype(C3[3]) * z * (dtype(2.0) * zz - dtype(3.0) * xx - dtype(3.0) * yy)
    out[:, 13] = dtype(C3[4]) * x * (dtype(4.0) * zz - xx - yy)
    out[:, 14] = dtype(C3[5]) * z * (xx - yy)
    out[:, 15] = dtype(C3[6]) * x * (xx - dtype(3.0) * yy)
    return out


def sh_basis_grad(dirs: np.ndarray) -> np.ndarray:
    """Partial derivatives of each basis function: N x 16 x 3 (d/dx, d/dy, d/dz)."""
    dirs = np.asarray(dirs)
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    xx, yy, zz = x * x, y * y, z * z
    zero = np.zeros_like(x)
    grad = np.zeros((dirs.shape[0], 16, 3), dtype=dirs.dtype)
    grad[:, 1] = np.stack([zero, zero - C1, zero], axis=1)
    grad[:, 2] = np.stack([zero, zero, zero + C1], axis=1)
    grad[:, 3] = np.stack([zero - C1, zero, zero], axis=1)
    grad[:, 4] = C2[0] * np.stack([y, x, zero], axis=1)
    grad[:, 5] = C2[1] * np.stack([zero, z, y], axis=1)
    grad[:, 6] = C2[2] * np.stack([-2.0 * x, -2.0 * y, 4.0 * z], axis=1)
    grad[:, 7] = C2[3] * np.stack([z, zero, x], axis=1)
    grad[:, 8] = C2[4] * np.stack([2.0 * x, -2.0 * y, zero], axis=1)
    grad[:, 9] = C3[0] * np.stack([6.0 * x * y, 3.0 * xx - 3.0 * yy, zero], axis=1)
    grad[:, 10] = C3[1] * np.stack([y * z, x * z, x * y], axis=1)
    grad[:, 11] = C3[2] * np.stack([-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z], axis=1)
    grad[:, 12] = C3[3] * np.stack([-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy], axis=1)
    grad[:, 13] = C3[4] * np.stack([4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z], axis=1)
    grad[:, 14] = C3[5] * np.stack([2.0 * x * z, -2.0 * y * z, xx - yy], axis=1)
    grad[:, 15] = C3[6] * np.stack([3.0 * xx - 3.0 * yy, -6.0 * x * y, zero], axis=1)
    return grad


def sh_to_raw_color(sh: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """``SH . Y + 0.5`` before clamping; ``sh`` is N x 16 x 3."""
    basis = sh_basis(dirs)
    return np.einsum("nk,nkc->nc", basis, sh) + dirs.dtype.type(SH_OFFSET)


def evaluate_sh(sh: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Colour of one Gaussian seen along a unit ``direction``."""
    sh = np.asarray(sh, dtype=np.float64).reshape(16, 3)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
        raise ConfigurationError("evaluate_sh expects a unit direction.")
    raw = sh_to_raw_color(sh[None], direction[None])[0]
    return np.maximum(raw, 0.0)


__all__ = ["C0", "C1", "C2", "C3", "SH_OFFSET", "evaluate_sh", "sh_basis", "sh_basis_grad", "sh_to_raw_color"]
