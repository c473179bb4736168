"""World-to-screen projection of Gaussians (EWA splatting, local affine approximation)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from render.settings import DEFAULT_SETTINGS, RenderSettings
from render.sh import sh_basis
from scene.camera import View
from scene.gaussians import GaussianCloud, LOG_SCALE, MEAN, OPACITY, QUATERNION, SH, SH_COEFFS


@dataclass(frozen=True, eq=False)
class ProjectedGaussian:
    mean2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    color: np.ndarray
    opacity: float
    source_index: int


def rotate_rows(R: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``v @ R.T`` written out per component so each row is computed independently."""
    return np.stack(
        [v[:, 0] * R[i, 0] + v[:, 1] * R[i, 1] + v[:, 2] * R[i, 2] for i in range(3)],
        axis=1,
    )


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrices (N x 3 x 3) from unit quaternions (w, x, y, z)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    one, two = q.dtype.type(1.0), q.dtype.type(2.0)
    R = np.empty((q.shape[0], 3, 3), dtype=q.dtype)
    R[:, 0, 0] = one - two * (y * y + z * z)
    R[:, 0, 1] = two * (x * y - w * z)
    R[:, 0, 2] = two * (x * z + w * y)
    R[:, 1, 0] = two * (x * y + w * z)
    R[:, 1, 1] = one - two * (x * x + z * z)
    R[:, 1, 2] = two * (y * z - w * x)
    R[:, 2, 0] = two * (x * z - w * y)
    R[:, 2, 1] = two * (y * z + w * x)
    R[:, 2, 2] = one - two * (x * x + y * y)
    return R


@dataclass(eq=False)
class Projection:
    """Every per-Gaussian quantity of the forward pass, reused by the adjoint.

    Arrays are indexed by source index; ``order`` lists the visible ones in
    depth order with ties broken by source index.
    """

    dtype: np.dtype
    visible: np.ndarray
    order: np.ndarray
    mean2d: np.ndarray
    cov2d: np.ndarray
    conic: np.ndarray
    depth: np.ndarray
    raw_color: np.ndarray
    color: np.ndarray
    opacity: np.ndarray
    radius: np.ndarray
    # intermediates for the backward pass
    mu: np.ndarray
    J: np.ndarray
    sigma_cam: np.ndarray
    M: np.ndarray
    rot_q: np.ndarray
    scales: np.ndarray
    quat_unit: np.ndarray
    quat_norm: np.ndarray
    dirs: np.ndarray
    dist: np.ndarray
    basis: np.ndarray
    sh: np.ndarray
    culled_near: int
    culled_guard: int


def project(cloud: GaussianCloud, view: View, settings: RenderSettings = DEFAULT_SETTINGS) -> Projection:
    dtype = settings.np_dtype
    T = dtype.type
    params = cloud.params.astype(dtype, copy=False)
    G = params.shape[0]
    Rv = view.rotation.astype(dtype)
    t = view.translation.astype(dtype)
    K = view.intrinsics.astype(dtype)
    fx, skew, cx = K[0, 0], K[0, 1], K[0, 2]
    fy, cy = K[1, 1], K[1, 2]

    with np.errstate(all="ignore"):
        rel = params[:, MEAN] - t
        mu = rotate_rows(Rv, rel)
        x, y, z = mu[:, 0], mu[:, 1], mu[:, 2]
        in_front = z > T(settings.near)
        safe_z = np.where(in_front, z, T(1.0))
        inv_z = T(1.0) / safe_z
        inv_z2 = inv_z * inv_z

        quats = params[:, QUATERNION]
        quat_norm = np.sqrt((quats * quats).sum(axis=1))
        quat_unit = quats / quat_norm[:, None]
        rot_q = quaternion_to_matrix(quat_unit)
        scales = np.exp(params[:, LOG_SCALE])
        M = rot_q * scales[:, None, :]
        sigma = np.einsum("nij,nkj->nik", M, M)
        sigma_cam = np.einsum("ij,njk,lk->nil", Rv, sigma, Rv)

        J = np.zeros((G, 2, 3), dtype=dtype)
        J[:, 0, 0] = fx * inv_z
        J[:, 0, 1] = skew * inv_z
        J[:, 0, 2] = -(fx * x + skew * y) * inv_z2
        J[:, 1, 1] = fy * inv_z
        J[:, 1, 2] = -fy * y * inv_z2

        mean2d = np.stack([(fx * x + skew * y) * inv_z + cx, fy * y * inv_z + cy], axis=1)
        cov2d = np.einsum("nij,njk,nlk->nil", J, sigma_cam, J)
        cov2d[:, 0, 0] += T(settings.low_pass)
        cov2d[:, 1, 1] += T(settings.low_pass)
        a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
        det = a * c - b * b
        conic = np.stack([c / det, -b / det, a / det], axis=1)

        dist = np.sqrt((rel * rel).sum(axis=1))
        dirs = rel / dist[:, None]
        sh = params[:, SH].reshape(G, SH_COEFFS, 3)
        basis = sh_basis(np.where(dist[:, None] > 0, dirs, T(0.0)))
        raw_color = np.einsum("nk,nkc->nc", basis, sh) + T(0.5)
        color = np.maximum(raw_color, T(0.0))
        opacity = T(1.0) / (T(1.0) + np.exp(-params[:, OPACITY][:, 0]))

    H, W = view.height, view.width
    band = settings.guard_band
    inside = (
        (mean2d[:, 0] >= -band * W)
        & (mean2d[:, 0] <= W + band * W)
        & (mean2d[:, 1] >= -band * H)
        & (mean2d[:, 1] <= H + band * H)
    )
    finite = np.isfinite(mean2d).all(axis=1) & np.isfinite(conic).all(axis=1) & (det > 0) & (dist > 0)
    visible = in_front & finite & inside
    culled_near = int((~in_front).sum())
    culled_guard = int((in_front & ~visible).sum())

    radius = np.full(G, -1.0)
    a64, b64, c64 = (cov2d[:, 0, 0].astype(np.float64), cov2d[:, 0, 1].astype(np.float64), cov2d[:, 1, 1].astype(np.float64))
    with np.errstate(all="ignore"):
        lam_max = 0.5 * (a64 + c64) + np.sqrt((0.5 * (a64 - c64)) ** 2 + b64 * b64)
        reach = np.log(opacity.astype(np.float64) / float(T(settings.alpha_min)))
        touches = visible & (reach >= 0)
        radius[touches] = np.sqrt(2.0 * reach[touches] * lam_max[touches]) + 1.0

    indices = np.flatnonzero(visible)
    order = indices[np.lexsort((indices, z[indices]))]

    return Projection(
        dtype=dtype,
        visible=visible,
        order=order,
        mean2d=mean2d,
        cov2d=cov2d,
        conic=conic,
        depth=z,
        raw_color=raw_color,
        color=color,
        opacity=opacity,
        radius=radius,
        mu=mu,
        J=J,
        sigma_cam=sigma_cam,
        M=M,
        rot_q=rot_q,
        scales=scales,
        quat_unit=quat_unit,
        quat_norm=quat_norm,
        dirs=dirs,
        dist=dist,
        basis=basis,
        sh=sh,
        culled_near=culled_near,
        culled_guard=culled_guard,
    )


def project_gaussians(
    cloud: GaussianCloud,
    view: View,
    near: Optional[float] = None,
    settings: Optional[RenderSettings] = None,
) -> list[ProjectedGaussian]:
    """Visible Gaussians in depth order; culled ones are silently dropped."""
    settings = settings or DEFAULT_SETTINGS
    if near is not None:
        settings = settings.replace(near=near)
    proj = project(cloud, view, settings)
    return [
        ProjectedGaussian(
            mean2d=proj.mean2d[i].copy(),
            cov2d=proj.cov2d[i].copy(),
            depth=float(proj.depth[i]),
            color=proj.color[i].copy(),
            opacity=float(proj.opacity[i]),
            source_index=int(i),
        )
        for i in proj.order
    ]


__all__ = ["ProjectedGaussian", "Projection", "project", "project_gaussians", "quaternion_to_matrix", "rotate_rows"]
