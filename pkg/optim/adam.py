"""Adam with bias correction, on the G x 59 cloud layout."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from core.errors import ShapeError

if TYPE_CHECKING:
    from optim.groups import ParamGroupConfig
    from scene.gaussians import GaussianCloud


def adam_update(
    m: np.ndarray,
    v: np.ndarray,
    g: np.ndarray,
    step: int,
    betas: tuple[float, float],
    eps: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance the moments with gradient ``g`` at ``step`` (1-based); returns (m, v, m_hat / (sqrt(v_hat) + eps))."""
    beta1, beta2 = betas
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * (g * g)
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    return m, v, m_hat / (np.sqrt(v_hat) + eps)


@dataclass(eq=False)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, count: int, columns: int = 59) -> "AdamState":
        return cls(np.zeros((count, columns)), np.zeros((count, columns)), 0)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.step)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AdamState):
            return NotImplemented
        return self.step == other.step and np.array_equal(self.m, other.m) and np.array_equal(self.v, other.v)

    __hash__ = object.__hash__


def adam_normalize(
    grads: np.ndarray,
    state: AdamState,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """The Adam direction without a learning rate, plus the advanced state."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != state.m.shape:
        raise ShapeError("adam_normalize", grads.shape, state.m.shape)
    step = state.step + 1
    m, v, direction = adam_update(state.m, state.v, grads, step, betas, eps)
    return direction, AdamState(m, v, step)


def adam_displacement(
    grads: np.ndarray, state: AdamState, config: "ParamGroupConfig"
) -> tuple[np.ndarray, AdamState]:
    """Per-column ``lr * direction`` using the learning rates in effect at ``state.step``."""
    lr = config.lr_vector(state.step)
    direction, state = adam_normalize(grads, state, config.betas, config.eps)
    return direction * lr[None, :], state


def adam_step(
    cloud: "GaussianCloud", grads: np.ndarray, state: AdamState, config: "ParamGroupConfig"
) -> tuple["GaussianCloud", AdamState]:
    displacement, state = adam_displacement(grads, state, config)
    return cloud.with_params(cloud.params - displacement), state


__all__ = ["AdamState", "adam_displacement", "adam_normalize", "adam_step", "adam_update"]
