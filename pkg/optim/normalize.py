"""Per-column gradient normalization."""
from __future__ import annotations

import numpy as np


def g3r_normalize(grads: np.ndarray) -> np.ndarray:
    """Divide every column by its largest magnitude in the scene; all-zero columns stay zero."""
    grads = np.asarray(grads, dtype=np.float64)
    peak = np.abs(grads).max(axis=0, keepdims=True)
    return np.divide(grads, peak, out=np.zeros_like(grads), where=peak > 0)


__all__ = ["g3r_normalize"]
