"""Losses on whole inner-loop trajectories."""
from __future__ import annotations

from typing import NamedTuple, Optional, Sequence

import numpy as np

from core.errors import ConfigurationError, ShapeError
from losses.image import PerceptualLoss, d_ssim, l1
from losses.report import LossReport

PERCEPTUAL_WEIGHT = 0.5
DEFAULT_GAMMA = 0.9
LVS_EPSILON = 1e-8

# One inner step: (reference image, rendered image) for every view rendered at that step.
StepImages = Sequence[tuple[np.ndarray, np.ndarray]]


class TrajectoryLoss(NamedTuple):
    value: float
    per_step: list[float]
    grads: list[list[np.ndarray]]  # d value / d rendered image, per step and view


def render_loss_and_grads(
    trajectory: Sequence[StepImages],
    gamma: float = DEFAULT_GAMMA,
    perceptual: Optional[PerceptualLoss] = None,
) -> TrajectoryLoss:
    """Discounted sum over steps of the per-step mean of ``l1 + 0.5 * perceptual``."""
    if len(trajectory) < 1:
        raise ConfigurationError("A trajectory needs at least one step.")
    perceptual = perceptual or d_ssim
    tau = len(trajectory)
    value, per_step, grads = 0.0, [], []
    for t, pairs in enumerate(trajectory):
        if not pairs:
            raise ConfigurationError(f"Trajectory step {t} rendered no views.")
        weight = gamma ** (tau - 1 - t)
        step_value, step_grads = 0.0, []
        for reference, rendered in pairs:
            photometric = l1(reference, rendered)
            structural = perceptual(reference, rendered)
            step_value += photometric.value + PERCEPTUAL_WEIGHT * structural.value
            step_grads.append((photometric.grad + PERCEPTUAL_WEIGHT * structural.grad) * (weight / len(pairs)))
        step_value /= len(pairs)
        per_step.append(step_value)
        value += weight * step_value
        grads.append(step_grads)
    return TrajectoryLoss(value, per_step, grads)


def render_loss(
    trajectory: Sequence[StepImages],
    gamma: float = DEFAULT_GAMMA,
    perceptual: Optional[PerceptualLoss] = None,
) -> float:
    return render_loss_and_grads(trajectory, gamma, perceptual).value


def low_visibility_mask(
    updates: np.ndarray, raw_grads: np.ndarray, adam_grads: np.ndarray, epsilon: float = LVS_EPSILON
) -> np.ndarray:
    """Entries whose raw gradient vanishes or whose update disagrees in sign with Adam."""
    updates, raw_grads, adam_grads = (np.asarray(x, dtype=np.float64) for x in (updates, raw_grads, adam_grads))
    if not updates.shape == raw_grads.shape == adam_grads.shape:
        raise ShapeError("low_visibility_loss", updates.shape, raw_grads.shape)
    vanishing = np.abs(raw_grads) < epsilon
    disagree = np.sign(updates) * np.sign(adam_grads) < 0
    return vanishing | disagree


def low_visibility_loss(
    updates: np.ndarray, raw_grads: np.ndarray, adam_grads: np.ndarray, epsilon: float = LVS_EPSILON
) -> float:
    mask = low_visibility_mask(updates, raw_grads, adam_grads, epsilon)
    return float(np.abs(np.asarray(updates, dtype=np.float64))[mask].sum())


def low_visibility_grad(
    updates: np.ndarray, raw_grads: np.ndarray, adam_grads: np.ndarray, epsilon: float = LVS_EPSILON
) -> np.ndarray:
    """d lvs / d updates with the mask held fixed."""
    mask = low_visibility_mask(updates, raw_grads, adam_grads, epsilon)
    return np.where(mask, np.sign(np.asarray(updates, dtype=np.float64)), 0.0)


def stability_loss_and_grads(errors: Sequence[float]) -> tuple[float, np.ndarray]:
    """Hinge on step-to-step error increases; the earlier error is a constant."""
    errors = np.asarray(errors, dtype=np.float64)
    grads = np.zeros_like(errors)
    value = 0.0
    for t in range(1, errors.size):
        increase = errors[t] - errors[t - 1]
        if increase > 0:
            value += increase
            grads[t] += 1.0
    return float(value), grads


def stability_loss(errors: Sequence[float]) -> float:
    return stability_loss_and_grads(errors)[0]


def meta_loss(render: float, lvs: float, stability: float) -> LossReport:
    """Unweighted sum of the render, low-visibility and stability terms."""
    return LossReport.combine({"render": float(render), "lvs": float(lvs), "stability": float(stability)})


__all__ = [
    "DEFAULT_GAMMA",
    "LVS_EPSILON",
    "PERCEPTUAL_WEIGHT",
    "TrajectoryLoss",
    "low_visibility_grad",
    "low_visibility_loss",
    "low_visibility_mask",
    "meta_loss",
    "render_loss",
    "render_loss_and_grads",
    "stability_loss",
    "stability_loss_and_grads",
]
