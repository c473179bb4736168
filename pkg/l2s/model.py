"""Forward passes of the learned optimizer.

Input ``x = [adam_grads | params | states]``; a kNN point transformer
produces the next states, a state-scale MLP gates them, and an update MLP
maps the gated states to a unit direction and a non-negative magnitude per
Gaussian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from autodiff import ops
from autodiff.params import ModelParameters, ParamSpec
from autodiff.tensor import Tensor2
from core.errors import EmptyCloudError, ShapeError
from l2s.config import OUTPUT_WIDTH, L2SConfig
from l2s.latents import LatentStates
from scene.gaussians import PARAM_COUNT, GaussianCloud
from spatial.knn import NeighborTable

DIRECTION_EPS = 1e-12


def model_layout(config: L2SConfig) -> list[ParamSpec]:
    D, H, A, hd = config.state_dim, config.mlp_hidden, config.attn_dim, config.head_dim
    specs = [ParamSpec("pt.in.w", config.input_dim, D), ParamSpec("pt.in.b", 1, D, "bias")]
    for i in range(config.n_blocks):
        p = f"pt.blocks.{i}"
        specs += [
            ParamSpec(f"{p}.ln1.g", 1, D, "gain"),
            ParamSpec(f"{p}.ln1.b", 1, D, "bias"),
            ParamSpec(f"{p}.qkv.w", D, A),
            ParamSpec(f"{p}.qkv.b", 1, A, "bias"),
            ParamSpec(f"{p}.proj.w", hd, D),
            ParamSpec(f"{p}.proj.b", 1, D, "bias"),
            ParamSpec(f"{p}.ln2.g", 1, D, "gain"),
            ParamSpec(f"{p}.ln2.b", 1, D, "bias"),
            ParamSpec(f"{p}.mlp1.w", D, H),
            ParamSpec(f"{p}.mlp1.b", 1, H, "bias"),
            ParamSpec(f"{p}.mlp2.w", H, D),
            ParamSpec(f"{p}.mlp2.b", 1, D, "bias"),
        ]
    if config.lo_baseline:
        specs += [ParamSpec("lo.head.w", D, PARAM_COUNT, "small"), ParamSpec("lo.head.b", 1, PARAM_COUNT, "bias")]
        return specs
    hs = config.scale_hidden_dim
    specs += [
        ParamSpec("scale.l1.w", config.input_dim, hs),
        ParamSpec("scale.l1.b", 1, hs, "bias"),
        ParamSpec("scale.l2.w", hs, 1),
        ParamSpec("scale.l2.b", 1, 1, "gain"),
        ParamSpec("update.l1.w", D, OUTPUT_WIDTH),
        ParamSpec("update.l1.b", 1, OUTPUT_WIDTH, "bias"),
        ParamSpec("update.l2.w", OUTPUT_WIDTH, OUTPUT_WIDTH, "small"),
        ParamSpec("update.l2.b", 1, OUTPUT_WIDTH, "bias"),
    ]
    return specs


def init_model(config: L2SConfig, seed: int, dtype=np.float32) -> ModelParameters:
    return ModelParameters.initialize(model_layout(config), seed, dtype)


def linear(x: Tensor2, params: ModelParameters, prefix: str) -> Tensor2:
    return ops.add(ops.matmul(x, params[f"{prefix}.w"]), params[f"{prefix}.b"])


@dataclass(eq=False)
class UpdatePrediction:
    delta: Tensor2
    direction: Optional[Tensor2] = None
    magnitude: Optional[Tensor2] = None
    state_scale: Optional[Tensor2] = None

    @property
    def delta_array(self) -> np.ndarray:
        return self.delta.data

    @property
    def magnitude_array(self) -> np.ndarray:
        return self.magnitude.data[:, 0] if self.magnitude is not None else np.linalg.norm(self.delta.data, axis=1)

    @property
    def state_scale_array(self) -> Optional[np.ndarray]:
        return None if self.state_scale is None else self.state_scale.data[:, 0]


@dataclass(eq=False)
class L2SStepResult:
    cloud: GaussianCloud
    states: LatentStates
    prediction: UpdatePrediction


def assemble_input(
    adam_grads: np.ndarray,
    cloud: GaussianCloud,
    states: Tensor2,
    time_features: Optional[np.ndarray] = None,
) -> Tensor2:
    """``[adam_grads | params | states (| time)]`` with grads and params detached."""
    adam_grads = np.asarray(adam_grads)
    if adam_grads.ndim != 2 or adam_grads.shape[0] == 0:
        raise EmptyCloudError("assemble_input needs at least one Gaussian.")
    if adam_grads.shape != (cloud.count, PARAM_COUNT):
        raise ShapeError("assemble_input", adam_grads.shape, (cloud.count, PARAM_COUNT))
    if states.rows != cloud.count:
        raise ShapeError("assemble_input", states.shape, (cloud.count, -1))
    dtype = states.data.dtype
    parts = [ops.constant(adam_grads, dtype), ops.constant(cloud.params, dtype), states]
    if time_features is not None:
        parts.append(ops.constant(np.tile(np.asarray(time_features).reshape(1, -1), (cloud.count, 1)), dtype))
    return ops.concat_cols(parts)


def knn_attention(h: Tensor2, neighbors: NeighborTable, params: ModelParameters, prefix: str, config: L2SConfig) -> Tensor2:
    d = config.head_dim
    qkv = linear(h, params, f"{prefix}.qkv")
    query = ops.slice_cols(qkv, 0, d)
    keys = ops.slice_cols(qkv, d, 2 * d)
    values = ops.slice_cols(qkv, 2 * d, 3 * d)
    columns = [neighbors.indices[:, j] for j in range(neighbors.k)]
    logits = ops.concat_cols(
        [ops.scale(ops.sum_cols(ops.mul(query, ops.gather_rows(keys, col))), 1.0 / math.sqrt(d)) for col in columns]
    )
    weights = ops.softmax_rows(logits)
    out = None
    for j, col in enumerate(columns):
        term = ops.scale_rows(ops.gather_rows(values, col), ops.slice_cols(weights, j, j + 1))
        out = term if out is None else ops.add(out, term)
    return linear(out, params, f"{prefix}.proj")


def point_transformer_forward(
    x: Tensor2, neighbors: NeighborTable, params: ModelParameters, config: L2SConfig
) -> Tensor2:
    """Unscaled next states ``s_{t+1}`` (pre-LN blocks with residuals)."""
    if neighbors.count != x.rows:
        raise ShapeError("point_transformer_forward", x.shape, neighbors.indices.shape)
    h = linear(x, params, "pt.in")
    for i in range(config.n_blocks):
        p = f"pt.blocks.{i}"
        attended = knn_attention(ops.layer_norm(h, params[f"{p}.ln1.g"], params[f"{p}.ln1.b"]), neighbors, params, p, config)
        h = ops.add(h, attended)
        hidden = ops.gelu(linear(ops.layer_norm(h, params[f"{p}.ln2.g"], params[f"{p}.ln2.b"]), params, f"{p}.mlp1"))
        h = ops.add(h, linear(hidden, params, f"{p}.mlp2"))
    return h


def state_scale_forward(x: Tensor2, params: ModelParameters) -> Tensor2:
    """Non-negative per-Gaussian gate (G x 1)."""
    return ops.relu(linear(ops.relu(linear(x, params, "scale.l1")), params, "scale.l2"))


def update_mlp_forward(scaled_states: Tensor2, params: ModelParameters) -> UpdatePrediction:
    raw = linear(ops.gelu(linear(scaled_states, params, "update.l1")), params, "update.l2")
    raw_direction = ops.slice_cols(raw, 0, PARAM_COUNT)
    direction = ops.unit_normalize_rows(raw_direction, DIRECTION_EPS)
    live = (np.sqrt((raw_direction.data * raw_direction.data).sum(axis=1, keepdims=True)) >= DIRECTION_EPS)
    magnitude = ops.mul(ops.relu(ops.slice_cols(raw, PARAM_COUNT, OUTPUT_WIDTH)), ops.constant(live, raw.data.dtype))
    delta = ops.scale_rows(direction, magnitude)
    return UpdatePrediction(delta=delta, direction=direction, magnitude=magnitude)


def apply_delta(cloud: GaussianCloud, delta: np.ndarray) -> GaussianCloud:
    return cloud.with_params(cloud.params - delta.astype(cloud.dtype, copy=False))


def l2s_step(
    cloud: GaussianCloud,
    adam_grads: np.ndarray,
    states: LatentStates,
    params: ModelParameters,
    neighbors: NeighborTable,
    config: L2SConfig,
) -> L2SStepResult:
    """One learned update ``G_{t+1} = G_t - delta``; the returned states are unscaled."""
    x = assemble_input(adam_grads, cloud, states.s)
    next_states = point_transformer_forward(x, neighbors, params, config)
    gate = state_scale_forward(x, params)
    prediction = update_mlp_forward(ops.scale_rows(next_states, gate), params)
    prediction.state_scale = gate
    return L2SStepResult(apply_delta(cloud, prediction.delta.data), LatentStates(next_states), prediction)


__all__ = [
    "L2SStepResult",
    "UpdatePrediction",
    "apply_delta",
    "assemble_input",
    "init_model",
    "knn_attention",
    "l2s_step",
    "linear",
    "model_layout",
    "point_transformer_forward",
    "state_scale_forward",
    "update_mlp_forward",
]
