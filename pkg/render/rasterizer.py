"""Tile-based front-to-back compositing of projected Gaussians and its adjoint."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from core.errors import ShapeError
from render.projection import Projection, project
from render.settings import DEFAULT_SETTINGS, RenderSettings
from render.sh import sh_basis_grad
from scene.camera import View
from scene.gaussians import GaussianCloud, LOG_SCALE, MEAN, OPACITY, PARAM_COUNT, QUATERNION, SH

logger = logging.getLogger("L2S")


@dataclass(frozen=True, eq=False)
class RenderedImage:
    rgb: np.ndarray
    alpha: np.ndarray


@dataclass(frozen=True, eq=False)
class GradientBatch:
    """dL/dparams in the G x 59 cloud layout."""

    grads: np.ndarray

    def __add__(self, other: "GradientBatch") -> "GradientBatch":
        return GradientBatch(self.grads + other.grads)


@dataclass(frozen=True, slots=True)
class RenderStats:
    visible: int
    culled_near: int
    culled_guard: int
    tiles: int


class _Consts:
    """Compositing thresholds cast to the working dtype."""

    __slots__ = ("zero", "one", "half", "alpha_max", "alpha_min", "t_min", "background")

    def __init__(self, dtype: np.dtype, settings: RenderSettings) -> None:
        T = dtype.type
        self.zero = T(0.0)
        self.one = T(1.0)
        self.half = T(0.5)
        self.alpha_max = T(settings.alpha_max)
        self.alpha_min = T(settings.alpha_min)
        self.t_min = T(settings.transmittance_min)
        self.background = np.asarray(settings.background, dtype=dtype)


def _splat(proj: Projection, k: int, px: np.ndarray, py: np.ndarray, c: _Consts):
    dx = px - proj.mean2d[k, 0]
    dy = py - proj.mean2d[k, 1]
    a, b, cc = proj.conic[k]
    power = -c.half * (a * dx * dx + cc * dy * dy) - b * dx * dy
    gauss = np.exp(power)
    weight = proj.opacity[k] * gauss
    alpha = np.minimum(c.alpha_max, weight)
    return dx, dy, power, gauss, weight, alpha


def _blend(proj: Projection, k: int, px, py, C, T, done, c: _Consts):
    """Composite Gaussian ``k`` over the pixels ``(px, py)`` in place."""
    dx, dy, power, gauss, weight, alpha = _splat(proj, k, px, py, c)
    active = ~done & (power <= c.zero) & (alpha >= c.alpha_min)
    test_T = T * (c.one - alpha)
    stop = active & (test_T < c.t_min)
    done |= stop
    active &= ~stop
    contribution = np.where(active, alpha * T, c.zero)
    C += contribution[:, None] * proj.color[k][None, :]
    T_before = T.copy()
    T[...] = np.where(active, test_T, T)
    return dx, dy, gauss, weight, alpha, active, T_before


def _tiles(height: int, width: int, size: int) -> list[tuple[int, int, int, int]]:
    return [
        (y0, min(y0 + size, height), x0, min(x0 + size, width))
        for y0 in range(0, height, size)
        for x0 in range(0, width, size)
    ]


def _tile_members(proj: Projection, tile) -> np.ndarray:
    y0, y1, x0, x1 = tile
    order = proj.order
    r = proj.radius[order]
    mx = proj.mean2d[order, 0].astype(np.float64)
    my = proj.mean2d[order, 1].astype(np.float64)
    hit = (r > 0) & (mx + r >= x0) & (mx - r <= x1 - 1) & (my + r >= y0) & (my - r <= y1 - 1)
    return order[hit]


def _pixel_grid(tile, dtype):
    y0, y1, x0, x1 = tile
    ys, xs = np.meshgrid(np.arange(y0, y1), np.arange(x0, x1), indexing="ij")
    return xs.reshape(-1).astype(dtype), ys.reshape(-1).astype(dtype)


def _map_tiles(fn: Callable, tiles: Sequence, threads: int) -> list:
    if threads <= 1 or len(tiles) <= 1:
        return [fn(tile) for tile in tiles]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tiles))


def _composite(proj: Projection, members: np.ndarray, px, py, c: _Consts):
    n = px.shape[0]
    C = np.zeros((n, 3), dtype=proj.dtype)
    T = np.ones(n, dtype=proj.dtype)
    done = np.zeros(n, dtype=bool)
    for k in members:
        _blend(proj, k, px, py, C, T, done, c)
    return C, T


def _finish(C: np.ndarray, T: np.ndarray, c: _Consts):
    rgb = C + T[:, None] * c.background[None, :]
    return rgb, c.one - T


def render_with_stats(
    cloud: GaussianCloud, view: View, settings: Optional[RenderSettings] = None
) -> tuple[RenderedImage, RenderStats]:
    settings = settings or DEFAULT_SETTINGS
    cloud.check_finite()
    proj = project(cloud, view, settings)
    consts = _Consts(proj.dtype, settings)
    H, W = view.height, view.width
    tiles = _tiles(H, W, settings.tile_size)

    def run(tile):
        px, py = _pixel_grid(tile, proj.dtype)
        return _finish(*_composite(proj, _tile_members(proj, tile), px, py, consts), consts)

    rgb = np.empty((H, W, 3), dtype=proj.dtype)
    alpha = np.empty((H, W), dtype=proj.dtype)
    for (y0, y1, x0, x1), (tile_rgb, tile_alpha) in zip(tiles, _map_tiles(run, tiles, settings.threads)):
        rgb[y0:y1, x0:x1] = tile_rgb.reshape(y1 - y0, x1 - x0, 3)
        alpha[y0:y1, x0:x1] = tile_alpha.reshape(y1 - y0, x1 - x0)

    stats = RenderStats(
        visible=int(proj.order.size),
        culled_near=proj.culled_near,
        culled_guard=proj.culled_guard,
        tiles=len(tiles),
    )
    if settings.stats:
        logger.debug("Rendered %s: %s", view.name, stats)
    return RenderedImage(rgb=rgb, alpha=alpha), stats


def render(cloud: GaussianCloud, view: View, settings: Optional[RenderSettings] = None) -> RenderedImage:
    return render_with_stats(cloud, view, settings)[0]


def render_naive(cloud: GaussianCloud, view: View, settings: Optional[RenderSettings] = None) -> RenderedImage:
    """Per-pixel loop over every depth-sorted Gaussian; no tiling, no culling by radius."""
    settings = settings or DEFAULT_SETTINGS
    cloud.check_finite()
    proj = project(cloud, view, settings)
    consts = _Consts(proj.dtype, settings)
    H, W = view.height, view.width
    rgb = np.empty((H, W, 3), dtype=proj.dtype)
    alpha = np.empty((H, W), dtype=proj.dtype)
    for i in range(H):
        for j in range(W):
            px = np.array([j], dtype=proj.dtype)
            py = np.array([i], dtype=proj.dtype)
            pixel_rgb, pixel_alpha = _finish(*_composite(proj, proj.order, px, py, consts), consts)
            rgb[i, j] = pixel_rgb[0]
            alpha[i, j] = pixel_alpha[0]
    return RenderedImage(rgb=rgb, alpha=alpha)


def render_batch(
    cloud: GaussianCloud, views: Sequence[View], settings: Optional[RenderSettings] = None
) -> list[RenderedImage]:
    return [render(cloud, view, settings) for view in views]


# ---------------------------------------------------------------------------
# adjoint


def _tile_backward(proj: Projection, tile, upstream: np.ndarray, c: _Consts):
    """Screen-space gradients for one tile: (members, d_mean2d, d_conic, d_opacity, d_color)."""
    y0, y1, x0, x1 = tile
    members = _tile_members(proj, tile)
    if members.size == 0:
        return members, None
    px, py = _pixel_grid(tile, proj.dtype)
    g = upstream[y0:y1, x0:x1].reshape(-1, 3)
    n = px.shape[0]
    C = np.zeros((n, 3), dtype=proj.dtype)
    T = np.ones(n, dtype=proj.dtype)
    done = np.zeros(n, dtype=bool)
    history = [_blend(proj, k, px, py, C, T, done, c) for k in members]

    count = members.size
    d_mean2d = np.zeros((count, 2))
    d_conic = np.zeros((count, 3))
    d_opacity = np.zeros(count)
    d_color = np.zeros((count, 3))
    accum = np.broadcast_to(c.background.astype(np.float64), (n, 3)).copy()
    g64 = g.astype(np.float64)
    for local in range(count - 1, -1, -1):
        k = members[local]
        dx, dy, gauss, weight, alpha, active, T_k = history[local]
        dx, dy, gauss, weight, alpha, T_k = (v.astype(np.float64) for v in (dx, dy, gauss, weight, alpha, T_k))
        color = proj.color[k].astype(np.float64)
        wT = np.where(active, alpha * T_k, 0.0)
        d_color[local] = (g64 * wT[:, None]).sum(axis=0)
        d_alpha = np.where(active, T_k * (g64 * (color[None, :] - accum)).sum(axis=1), 0.0)
        accum = np.where(active[:, None], alpha[:, None] * color[None, :] + (1.0 - alpha[:, None]) * accum, accum)
        d_weight = np.where(active & (weight < float(c.alpha_max)), d_alpha, 0.0)
        d_opacity[local] = (d_weight * gauss).sum()
        d_power = d_weight * weight
        a, b, cc = proj.conic[k].astype(np.float64)
        d_conic[local] = (
            (d_power * -0.5 * dx * dx).sum(),
            (d_power * -dx * dy).sum(),
            (d_power * -0.5 * dy * dy).sum(),
        )
        d_mean2d[local] = (
            (d_power * (a * dx + b * dy)).sum(),
            (d_power * (b * dx + cc * dy)).sum(),
        )
    return members, (d_mean2d, d_conic, d_opacity, d_color)


def _projection_backward(
    proj: Projection,
    view: View,
    d_mean2d: np.ndarray,
    d_conic: np.ndarray,
    d_opacity: np.ndarray,
    d_color: np.ndarray,
) -> np.ndarray:
    """Chain screen-space gradients back to the 59 parameters (computed in fp64)."""
    G = proj.visible.shape[0]
    grads = np.zeros((G, PARAM_COUNT))
    idx = np.flatnonzero(proj.visible)
    if idx.size == 0:
        return grads

    def f64(arr):
        return np.asarray(arr[idx], dtype=np.float64)

    conic, J, sigma_cam, M = f64(proj.conic), f64(proj.J), f64(proj.sigma_cam), f64(proj.M)
    rot_q, scales, qn, qnorm = f64(proj.rot_q), f64(proj.scales), f64(proj.quat_unit), f64(proj.quat_norm)
    mu, dirs, dist, basis, sh = f64(proj.mu), f64(proj.dirs), f64(proj.dist), f64(proj.basis), f64(proj.sh)
    raw_color, opacity = f64(proj.raw_color), f64(proj.opacity)
    dm, dq_conic, dop, dcol = d_mean2d[idx], d_conic[idx], d_opacity[idx], d_color[idx]

    Rv = view.rotation.astype(np.float64)
    K = view.intrinsics.astype(np.float64)
    fx, skew, fy = K[0, 0], K[0, 1], K[1, 1]

    # conic -> 2D covariance
    Q = np.empty((idx.size, 2, 2))
    Q[:, 0, 0], Q[:, 0, 1], Q[:, 1, 0], Q[:, 1, 1] = conic[:, 0], conic[:, 1], conic[:, 1], conic[:, 2]
    G_Q = np.empty_like(Q)
    G_Q[:, 0, 0] = dq_conic[:, 0]
    G_Q[:, 0, 1] = G_Q[:, 1, 0] = 0.5 * dq_conic[:, 1]
    G_Q[:, 1, 1] = dq_conic[:, 2]
    G_2d = -np.einsum("nij,njk,nkl->nil", Q, G_Q, Q)

    # 2D covariance -> camera covariance and Jacobian
    G_cam = np.einsum("nji,njk,nkl->nil", J, G_2d, J)
    G_J = np.einsum("nij,njk,nkl->nil", G_2d + G_2d.transpose(0, 2, 1), J, sigma_cam)

    # camera covariance -> world covariance -> M = R_q S
    G_sigma = np.einsum("ji,njk,kl->nil", Rv, G_cam, Rv)
    G_M = np.einsum("nij,njk->nik", G_sigma + G_sigma.transpose(0, 2, 1), M)
    G_R = G_M * scales[:, None, :]
    G_s = (rot_q * G_M).sum(axis=1)
    grads[idx, LOG_SCALE] = G_s * scales

    w, x, y, z = qn[:, 0], qn[:, 1], qn[:, 2], qn[:, 3]
    zero = np.zeros_like(w)
    dR = np.stack(
        [
            2.0 * np.array([[zero, -z, y], [z, zero, -x], [-y, x, zero]]),
            2.0 * np.array([[zero, y, z], [y, -2.0 * x, -w], [z, w, -2.0 * x]]),
            2.0 * np.array([[-2.0 * y, x, w], [x, zero, z], [-w, z, -2.0 * y]]),
            2.0 * np.array([[-2.0 * z, -w, x], [w, -2.0 * z, y], [x, y, zero]]),
        ]
    )  # 4 x 3 x 3 x N
    d_qn = np.einsum("nij,kijn->nk", G_R, dR)
    d_q = (d_qn - qn * (qn * d_qn).sum(axis=1, keepdims=True)) / qnorm[:, None]
    grads[idx, QUATERNION] = d_q

    # mean: through the 2D mean, the Jacobian and the view direction
    inv_z = 1.0 / mu[:, 2]
    inv_z2 = inv_z * inv_z
    inv_z3 = inv_z2 * inv_z
    mx, my = mu[:, 0], mu[:, 1]
    d_mu = np.einsum("nji,nj->ni", J, dm)
    d_mu[:, 0] += G_J[:, 0, 2] * (-fx * inv_z2)
    d_mu[:, 1] += G_J[:, 0, 2] * (-skew * inv_z2) + G_J[:, 1, 2] * (-fy * inv_z2)
    d_mu[:, 2] += (
        G_J[:, 0, 0] * (-fx * inv_z2)
        + G_J[:, 0, 1] * (-skew * inv_z2)
        + G_J[:, 0, 2] * (2.0 * (fx * mx + skew * my) * inv_z3)
        + G_J[:, 1, 1] * (-fy * inv_z2)
        + G_J[:, 1, 2] * (2.0 * fy * my * inv_z3)
    )
    d_mean = d_mu @ Rv

    # colour: SH coefficients and view direction
    d_col = np.where(raw_color > 0.0, dcol, 0.0)
    grads[idx, SH] = np.einsum("nk,nc->nkc", basis, d_col).reshape(idx.size, -1)
    d_dir = np.einsum("nc,nkc,nkj->nj", d_col, sh, sh_basis_grad(dirs))
    d_mean += (d_dir - dirs * (dirs * d_dir).sum(axis=1, keepdims=True)) / dist[:, None]
    grads[idx, MEAN] = d_mean

    grads[idx, OPACITY] = (dop * opacity * (1.0 - opacity))[:, None]
    return grads


def render_backward(
    cloud: GaussianCloud,
    view: View,
    upstream: np.ndarray,
    settings: Optional[RenderSettings] = None,
) -> GradientBatch:
    """Gradient of ``<upstream, render(cloud, view).rgb>`` w.r.t. the cloud parameters."""
    settings = settings or DEFAULT_SETTINGS
    upstream = np.asarray(upstream)
    if upstream.shape != (view.height, view.width, 3):
        raise ShapeError("render_backward", upstream.shape, (view.height, view.width, 3))
    cloud.check_finite()
    proj = project(cloud, view, settings)
    consts = _Consts(proj.dtype, settings)
    G = cloud.count
    d_mean2d = np.zeros((G, 2))
    d_conic = np.zeros((G, 3))
    d_opacity = np.zeros(G)
    d_color = np.zeros((G, 3))
    if np.any(upstream):
        tiles = _tiles(view.height, view.width, settings.tile_size)
        parts = _map_tiles(lambda tile: _tile_backward(proj, tile, upstream, consts), tiles, settings.threads)
        for members, part in parts:
            if part is None:
                continue
            d_mean2d[members] += part[0]
            d_conic[members] += part[1]
            d_opacity[members] += part[2]
            d_color[members] += part[3]
    grads = _projection_backward(proj, view, d_mean2d, d_conic, d_opacity, d_color)
    return GradientBatch(grads.astype(proj.dtype))


def render_batch_backward(
    cloud: GaussianCloud,
    views: Sequence[View],
    upstreams: Sequence[np.ndarray],
    settings: Optional[RenderSettings] = None,
) -> GradientBatch:
    """Mean of the per-view gradients."""
    if len(views) != len(upstreams) or not views:
        raise ShapeError("render_batch_backward", (len(views),), (len(upstreams),))
    total = render_backward(cloud, views[0], upstreams[0], settings).grads
    for view, upstream in zip(views[1:], upstreams[1:]):
        total = total + render_backward(cloud, view, upstream, settings).grads
    return GradientBatch(total / total.dtype.type(len(views)))


__all__ = [
    "GradientBatch",
    "RenderStats",
    "RenderedImage",
    "render",
    "render_backward",
    "render_batch",
    "render_batch_backward",
    "render_naive",
    "render_with_stats",
]
