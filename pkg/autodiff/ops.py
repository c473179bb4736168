"""Differentiable graph ops on :class:`Tensor2`.

Every op computes its result with plain numpy and hands an adjoint closure
to :func:`record`; closures only touch numpy arrays.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import erf

from autodiff.tensor import Tensor2, record
from core.errors import ShapeError

LAYER_NORM_EPS = 1e-5
NORMALIZE_EPS = 1e-12


def _send(tensor: Tensor2, grad: np.ndarray) -> None:
    if tensor.requires_grad:
        tensor.accumulate(grad)


def _same_shape(op: str, a: Tensor2, b: Tensor2) -> None:
    if a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)


def _row_broadcast(op: str, a: Tensor2, b: Tensor2) -> bool:
    """True when ``b`` is a 1 x C row added to every row of ``a``."""
    if a.shape == b.shape:
        return False
    if b.rows == 1 and b.cols == a.cols:
        return True
    raise ShapeError(op, a.shape, b.shape)


def matmul(a: Tensor2, b: Tensor2) -> Tensor2:
    if a.cols != b.rows:
        raise ShapeError("matmul", a.shape, b.shape)

    def backward(g: np.ndarray) -> None:
        _send(a, g @ b.data.T)
        _send(b, a.data.T @ g)

    return record(a.data @ b.data, (a, b), backward, "matmul")


def add(a: Tensor2, b: Tensor2) -> Tensor2:
    broadcast = _row_broadcast("add", a, b)

    def backward(g: np.ndarray) -> None:
        _send(a, g)
        _send(b, g.sum(axis=0, keepdims=True) if broadcast else g)

    return record(a.data + b.data, (a, b), backward, "add")


def sub(a: Tensor2, b: Tensor2) -> Tensor2:
    _same_shape("sub", a, b)

    def backward(g: np.ndarray) -> None:
        _send(a, g)
        _send(b, -g)

    return record(a.data - b.data, (a, b), backward, "sub")


def mul(a: Tensor2, b: Tensor2) -> Tensor2:
    _same_shape("mul", a, b)

    def backward(g: np.ndarray) -> None:
        _send(a, g * b.data)
        _send(b, g * a.data)

    return record(a.data * b.data, (a, b), backward, "mul")


def scale(a: Tensor2, factor: float) -> Tensor2:
    factor = a.data.dtype.type(factor)

    def backward(g: np.ndarray) -> None:
        _send(a, g * factor)

    return record(a.data * factor, (a,), backward, "scale")


def concat_cols(parts: Sequence[Tensor2]) -> Tensor2:
    rows = {p.rows for p in parts}
    if len(rows) != 1:
        raise ShapeError("concat_cols", parts[0].shape, next(p.shape for p in parts if p.rows != parts[0].rows))
    bounds = np.cumsum([0] + [p.cols for p in parts])

    def backward(g: np.ndarray) -> None:
        for part, start, stop in zip(parts, bounds[:-1], bounds[1:]):
            _send(part, g[:, start:stop])

    return record(np.concatenate([p.data for p in parts], axis=1), tuple(parts), backward, "concat_cols")


def slice_cols(a: Tensor2, start: int, stop: int) -> Tensor2:
    if not 0 <= start < stop <= a.cols:
        raise ShapeError("slice_cols", a.shape, (start, stop))

    def backward(g: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        _send(a, full)

    return record(a.data[:, start:stop].copy(), (a,), backward, "slice_cols")


def sum_cols(a: Tensor2) -> Tensor2:
    """Row sums as a G x 1 column."""

    def backward(g: np.ndarray) -> None:
        _send(a, np.broadcast_to(g, a.shape).copy())

    return record(a.data.sum(axis=1, keepdims=True), (a,), backward, "sum_cols")


def sum_all(a: Tensor2) -> Tensor2:
    def backward(g: np.ndarray) -> None:
        _send(a, np.full_like(a.data, g[0, 0]))

    return record(a.data.sum().reshape(1, 1), (a,), backward, "sum_all")


def abs(a: Tensor2) -> Tensor2:  # noqa: A001 - mirrors numpy naming
    def backward(g: np.ndarray) -> None:
        _send(a, g * np.sign(a.data))

    return record(np.abs(a.data), (a,), backward, "abs")


def layer_norm(x: Tensor2, gain: Tensor2, bias: Tensor2, eps: float = LAYER_NORM_EPS) -> Tensor2:
    if gain.shape != (1, x.cols) or bias.shape != (1, x.cols):
        raise ShapeError("layer_norm", x.shape, gain.shape)
    mean = x.data.mean(axis=1, keepdims=True)
    centered = x.data - mean
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=1, keepdims=True) + x.data.dtype.type(eps))
    normed = centered * inv_std

    def backward(g: np.ndarray) -> None:
        _send(gain, (g * normed).sum(axis=0, keepdims=True))
        _send(bias, g.sum(axis=0, keepdims=True))
        if x.requires_grad:
            d_normed = g * gain.data
            mean_d = d_normed.mean(axis=1, keepdims=True)
            mean_dn = (d_normed * normed).mean(axis=1, keepdims=True)
            x.accumulate(inv_std * (d_normed - mean_d - normed * mean_dn))

    return record(normed * gain.data + bias.data, (x, gain, bias), backward, "layer_norm")


def gelu(x: Tensor2) -> Tensor2:
    """Exact (erf) GELU."""
    cdf = 0.5 * (1.0 + erf(x.data / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * x.data * x.data) / math.sqrt(2.0 * math.pi)

    def backward(g: np.ndarray) -> None:
        _send(x, g * (cdf + x.data * pdf))

    return record((x.data * cdf).astype(x.data.dtype), (x,), backward, "gelu")


def relu(x: Tensor2) -> Tensor2:
    positive = x.data > 0

    def backward(g: np.ndarray) -> None:
        _send(x, np.where(positive, g, 0))

    return record(np.where(positive, x.data, 0).astype(x.data.dtype), (x,), backward, "relu")


def sigmoid(x: Tensor2) -> Tensor2:
    out = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g: np.ndarray) -> None:
        _send(x, g * out * (1.0 - out))

    return record(out, (x,), backward, "sigmoid")


def softmax_rows(x: Tensor2) -> Tensor2:
    shifted = np.exp(x.data - x.data.max(axis=1, keepdims=True))
    out = shifted / shifted.sum(axis=1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        _send(x, out * (g - (g * out).sum(axis=1, keepdims=True)))

    return record(out, (x,), backward, "softmax_rows")


def scale_rows(x: Tensor2, factors: Tensor2) -> Tensor2:
    """Multiply row i of ``x`` by ``factors[i, 0]``."""
    if factors.shape != (x.rows, 1):
        raise ShapeError("scale_rows", x.shape, factors.shape)

    def backward(g: np.ndarray) -> None:
        _send(x, g * factors.data)
        _send(factors, (g * x.data).sum(axis=1, keepdims=True))

    return record(x.data * factors.data, (x, factors), backward, "scale_rows")


def unit_normalize_rows(x: Tensor2, eps: float = NORMALIZE_EPS) -> Tensor2:
    """Rows scaled to unit length; rows with norm below ``eps`` map to zero."""
    norms = np.sqrt((x.data * x.data).sum(axis=1, keepdims=True))
    live = norms >= eps
    safe = np.where(live, norms, 1.0)
    out = np.where(live, x.data / safe, 0).astype(x.data.dtype)

    def backward(g: np.ndarray) -> None:
        tangent = g - out * (g * out).sum(axis=1, keepdims=True)
        _send(x, np.where(live, tangent / safe, 0))

    return record(out, (x,), backward, "unit_normalize_rows")


def stop_gradient(x: Tensor2) -> Tensor2:
    return Tensor2(x.data, requires_grad=False, dtype=x.data.dtype)


def gather_rows(x: Tensor2, indices: np.ndarray) -> Tensor2:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 1 or (indices.size and (indices.min() < 0 or indices.max() >= x.rows)):
        raise ShapeError("gather_rows", x.shape, indices.shape)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            full = np.zeros_like(x.data)
            np.add.at(full, indices, g)
            x.accumulate(full)

    return record(x.data[indices], (x,), backward, "gather_rows")


def constant(data, dtype=None) -> Tensor2:
    return Tensor2(data, requires_grad=False, dtype=dtype)


__all__ = [
    "abs",
    "add",
    "concat_cols",
    "constant",
    "gather_rows",
    "gelu",
    "layer_norm",
    "matmul",
    "mul",
    "relu",
    "scale",
    "scale_rows",
    "sigmoid",
    "slice_cols",
    "softmax_rows",
    "stop_gradient",
    "sub",
    "sum_all",
    "sum_cols",
    "unit_normalize_rows",
]
