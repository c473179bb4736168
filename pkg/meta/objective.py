"""Meta loss over a recorded trajectory and the gradient seeds for its tape."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from autodiff.tensor import Tensor2
from core.errors import ConfigurationError
from losses.image import PerceptualLoss, l1
from losses.meta import low_visibility_grad, low_visibility_loss, meta_loss, render_loss_and_grads, stability_loss_and_grads
from losses.report import LossReport
from meta.config import MetaConfig
from meta.rollout import StepRecord
from render.rasterizer import render_backward
from render.settings import RenderSettings


@dataclass(eq=False)
class MetaObjective:
    report: LossReport
    seeds: list[tuple[Tensor2, np.ndarray]]
    per_step_render: list[float]
    target_errors: list[float]


def target_errors(records: Sequence[StepRecord]) -> list[float]:
    """Mean target-view l1 after every step."""
    errors = []
    for record in records:
        offset = record.n_context
        pairs = zip(record.views[offset:], record.renders[offset:])
        values = [l1(view.image, rgb).value for view, rgb in pairs]
        errors.append(float(np.mean(values)) if values else 0.0)
    return errors


def meta_objective(
    records: Sequence[StepRecord],
    config: MetaConfig,
    settings: Optional[RenderSettings] = None,
    perceptual: Optional[PerceptualLoss] = None,
) -> MetaObjective:
    """
    Render + low-visibility + stability loss of a train-mode trajectory.

    The seeds are ``d loss / d delta_t`` for every step: since
    ``G_{t+1} = G_t - delta_t`` and the inputs to later steps are detached,
    the render and stability terms reach ``delta_t`` only through the
    images of ``G_{t+1}``.
    """
    if not records:
        raise ConfigurationError("The meta loss needs at least one recorded step.")
    if any(not record.renders for record in records):
        raise ConfigurationError("Meta loss requires records from a train-mode rollout.")

    trajectory = [[(view.image, rgb) for view, rgb in zip(r.views, r.renders)] for r in records]
    render_term = render_loss_and_grads(trajectory, config.gamma, perceptual)
    upstreams = [[np.asarray(g, dtype=np.float64) for g in step_grads] for step_grads in render_term.grads]

    errors = target_errors(records)
    stability, d_errors = stability_loss_and_grads(errors) if config.use_stability else (0.0, np.zeros(len(records)))
    for t, record in enumerate(records):
        if d_errors[t] == 0.0:
            continue
        offset = record.n_context
        n_targets = len(record.views) - offset
        for v in range(offset, len(record.views)):
            grad = l1(record.views[v].image, record.renders[v]).grad
            upstreams[t][v] = upstreams[t][v] + grad * (d_errors[t] / n_targets)

    lvs = 0.0
    seeds: list[tuple[Tensor2, np.ndarray]] = []
    for t, record in enumerate(records):
        seed = np.zeros(record.delta.shape)
        for view, upstream in zip(record.views, upstreams[t]):
            seed -= render_backward(record.cloud_after, view, upstream, settings).grads
        if config.use_lvs:
            lvs += low_visibility_loss(record.delta.data, record.raw_grads, record.adam_grads, config.lvs_epsilon)
            seed += low_visibility_grad(record.delta.data, record.raw_grads, record.adam_grads, config.lvs_epsilon)
        seeds.append((record.delta, seed.astype(record.delta.data.dtype)))

    report = meta_loss(render_term.value, lvs, stability)
    return MetaObjective(report, seeds, render_term.per_step, errors)


__all__ = ["MetaObjective", "meta_objective", "target_errors"]
