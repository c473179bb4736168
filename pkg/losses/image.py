"""Photometric losses between a reference image and a rendering."""
from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy import ndimage

from core.errors import ShapeError
from losses.report import ImageLoss, LossReport

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
L1_WEIGHT = 0.8
DSSIM_WEIGHT = 0.2
PSNR_CAP = 99.0

PerceptualLoss = Callable[[np.ndarray, np.ndarray], ImageLoss]


def _check(a: np.ndarray, b: np.ndarray, op: str) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)
    return a, b


def l1(reference: np.ndarray, rendered: np.ndarray) -> ImageLoss:
    a, b = _check(reference, rendered, "l1")
    diff = b - a
    return ImageLoss(float(np.abs(diff).mean()), np.sign(diff) / diff.size)


def _window() -> np.ndarray:
    radius = SSIM_WINDOW // 2
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * SSIM_SIGMA**2))
    return kernel / kernel.sum()


_KERNEL = _window()
_RADIUS = SSIM_WINDOW // 2


def _blur(image: np.ndarray) -> np.ndarray:
    """Separable Gaussian window over H and W with symmetric (mirror) borders."""
    padded = np.pad(image, ((_RADIUS, _RADIUS), (_RADIUS, _RADIUS), (0, 0)), mode="symmetric")
    out = ndimage.correlate1d(padded, _KERNEL, axis=0, mode="constant")
    out = ndimage.correlate1d(out, _KERNEL, axis=1, mode="constant")
    return out[_RADIUS:-_RADIUS, _RADIUS:-_RADIUS]


def _fold_axis(padded: np.ndarray, size: int, axis: int) -> np.ndarray:
    source = np.pad(np.arange(size), _RADIUS, mode="symmetric")
    shape = list(padded.shape)
    shape[axis] = size
    out = np.zeros(shape)
    moved = np.moveaxis(out, axis, 0)
    np.add.at(moved, source, np.moveaxis(padded, axis, 0))
    return out


def _blur_adjoint(grad: np.ndarray) -> np.ndarray:
    H, W = grad.shape[:2]
    embedded = np.zeros((H + 2 * _RADIUS, W + 2 * _RADIUS, grad.shape[2]))
    embedded[_RADIUS:-_RADIUS, _RADIUS:-_RADIUS] = grad
    out = ndimage.correlate1d(embedded, _KERNEL[::-1], axis=0, mode="constant")
    out = ndimage.correlate1d(out, _KERNEL[::-1], axis=1, mode="constant")
    return _fold_axis(_fold_axis(out, H, 0), W, 1)


def _ssim_terms(a: np.ndarray, b: np.ndarray):
    mu_a, mu_b = _blur(a), _blur(b)
    var_a = _blur(a * a) - mu_a * mu_a
    var_b = _blur(b * b) - mu_b * mu_b
    cov = _blur(a * b) - mu_a * mu_b
    lum_num = 2.0 * mu_a * mu_b + SSIM_C1
    con_num = 2.0 * cov + SSIM_C2
    lum_den = mu_a * mu_a + mu_b * mu_b + SSIM_C1
    con_den = var_a + var_b + SSIM_C2
    ssim_map = (lum_num * con_num) / (lum_den * con_den)
    return ssim_map, (mu_a, mu_b, lum_num, con_num, lum_den, con_den)


def ssim(reference: np.ndarray, rendered: np.ndarray) -> float:
    a, b = _check(reference, rendered, "ssim")
    return float(_ssim_terms(a, b)[0].mean())


def d_ssim(reference: np.ndarray, rendered: np.ndarray) -> ImageLoss:
    """``(1 - SSIM) / 2`` and its gradient w.r.t. ``rendered``."""
    a, b = _check(reference, rendered, "d_ssim")
    ssim_map, (mu_a, mu_b, lum_num, con_num, lum_den, con_den) = _ssim_terms(a, b)
    value = 0.5 * (1.0 - ssim_map.mean())

    d_map = -0.5 / ssim_map.size
    denom = lum_den * con_den
    d_mu_b = d_map * (
        (2.0 * mu_a * con_num - 2.0 * mu_a * lum_num) / denom
        - ssim_map * (2.0 * mu_b / lum_den - 2.0 * mu_b / con_den)
    )
    d_bb = d_map * (-ssim_map / con_den)
    d_ab = d_map * (2.0 * lum_num / denom)
    grad = _blur_adjoint(d_mu_b) + 2.0 * b * _blur_adjoint(d_bb) + a * _blur_adjoint(d_ab)
    return ImageLoss(float(value), grad)


def psnr(reference: np.ndarray, rendered: np.ndarray, cap: float = PSNR_CAP) -> float:
    a, b = _check(reference, rendered, "psnr")
    mse = float(((a - b) ** 2).mean())
    if mse <= 0.0:
        return cap
    return min(cap, -10.0 * math.log10(mse))


def inner_loss(reference: np.ndarray, rendered: np.ndarray, perceptual: Optional[PerceptualLoss] = None) -> LossReport:
    """``0.8 * l1 + 0.2 * D-SSIM``; the report carries the gradient w.r.t. ``rendered``."""
    structural = (perceptual or d_ssim)(reference, rendered)
    photometric = l1(reference, rendered)
    report = LossReport.combine(
        {"l1": photometric.value, "d_ssim": structural.value},
        {"l1": L1_WEIGHT, "d_ssim": DSSIM_WEIGHT},
    )
    report.grad = L1_WEIGHT * photometric.grad + DSSIM_WEIGHT * structural.grad
    return report


__all__ = ["PSNR_CAP", "PerceptualLoss", "d_ssim", "inner_loss", "l1", "psnr", "ssim"]
