"""Training losses."""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..errors import RangeError, ShapeError
from . import tensor as T
from .tensor import Tensor

PROB_FLOOR = 1e-12


class LossKind(Enum):
    MEAN_SQUARED_ERROR = "mse"
    CROSS_ENTROPY = "cross_entropy"


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean of squared differences over all elements."""
    target = np.asarray(target if not isinstance(target, Tensor) else target.data)
    if target.shape != pred.data.shape:
        raise ShapeError(f"mse shapes differ: {pred.data.shape} vs {target.shape}")
    diff = pred - target
    return T.mean_all(diff * diff)


def cross_entropy_loss(probs: Tensor, targets) -> Tensor:
    """-log p[target], averaged over the batch.

    ``probs`` are class probabilities (rows summing to 1), ``targets`` integer
    class indices. Probabilities are floored at 1e-12 inside the log.
    """
    targets = np.asarray(targets)
    if probs.data.ndim != 2:
        raise ShapeError(f"cross entropy expects (N, C) probabilities, got {probs.data.shape}")
    if not np.issubdtype(targets.dtype, np.integer):
        raise RangeError("cross entropy targets must be integer class indices")
    n_classes = probs.data.shape[1]
    if targets.min(initial=0) < 0 or targets.max(initial=0) >= n_classes:
        raise RangeError(f"class index out of range for {n_classes} classes")
    picked = T.gather_rows(probs, targets)
    return -T.mean_all(T.log_clipped(picked, PROB_FLOOR))


def loss(pred: Tensor, target, kind: LossKind) -> Tensor:
    if kind is LossKind.MEAN_SQUARED_ERROR:
        return mse_loss(pred, target)
    if kind is LossKind.CROSS_ENTROPY:
        return cross_entropy_loss(pred, target)
    raise RangeError(f"unknown loss kind {kind}")
