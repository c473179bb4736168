"""Loss values, gradients and per-term reports shared by the loss modules."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np


class ImageLoss(NamedTuple):
    """A scalar loss and its gradient w.r.t. the rendered (second) image."""

    value: float
    grad: np.ndarray


@dataclass(eq=False)
class LossReport:
    """Weighted sum of named terms; ``grad`` is set when the loss is differentiated."""

    value: float
    terms: dict[str, float]
    weights: dict[str, float] = field(default_factory=dict)
    grad: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def combine(cls, terms: dict[str, float], weights: Optional[dict[str, float]] = None) -> "LossReport":
        weights = weights or {name: 1.0 for name in terms}
        value = float(sum(weights[name] * terms[name] for name in terms))
        return cls(value=value, terms=dict(terms), weights=dict(weights))


__all__ = ["ImageLoss", "LossReport"]
