"""Learning-rate schedules and the sinusoidal step encoding."""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from core.errors import ConfigurationError

COSINE_OFFSET = 0.008
TIME_FREQUENCIES = 6


def log_linear_lr(step: int, lr_init: float, lr_final: float, total_steps: int) -> float:
    """Exponential interpolation from ``lr_init`` to ``lr_final`` over ``total_steps``."""
    ratio = min(max(step / total_steps, 0.0), 1.0)
    return math.exp((1.0 - ratio) * math.log(lr_init) + ratio * math.log(lr_final))


def cosine_lr(t: float, T: float, s: float = COSINE_OFFSET, eta_min: float = 0.0, eta_max: float = 1.0) -> float:
    """Offset-cosine decay: ``eta_min + (eta_max - eta_min) * cos(((t/T + s) / (1 + s)) * pi / 2) ** 2``."""
    if T <= 0:
        raise ConfigurationError("cosine_lr needs T > 0.")
    progress = min(max(t / T, 0.0), 1.0)
    factor = math.cos(((progress + s) / (1.0 + s)) * math.pi / 2.0) ** 2
    if progress >= 1.0:
        factor = 0.0
    return eta_min + (eta_max - eta_min) * factor


def time_encoding(t: float, T: Optional[float] = None, L: int = TIME_FREQUENCIES) -> np.ndarray:
    """``(sin(2^k pi p), cos(2^k pi p))`` for k < L, interleaved; ``p = t / T`` unless ``T`` is None."""
    p = t / T if T is not None else float(t)
    out = np.empty(2 * L)
    for k in range(L):
        angle = (2.0**k) * math.pi * p
        out[2 * k] = math.sin(angle)
        out[2 * k + 1] = math.cos(angle)
    return out


__all__ = ["COSINE_OFFSET", "TIME_FREQUENCIES", "cosine_lr", "log_linear_lr", "time_encoding"]
