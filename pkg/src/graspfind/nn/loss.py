"""Multi-label binary cross entropy.

Each output is an independent binary classification; the loss is the mean of
the per-output BCE over every output and every batch row.
"""

from __future__ import annotations

import numpy as np

__all__ = ["bce_loss", "CLAMP_EPS"]

CLAMP_EPS = 1e-7


def bce_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """(loss, d loss / d pred) with predictions clamped to [1e-7, 1 - 1e-7].

    The gradient is exactly zero where the clamp is active, matching the
    derivative of the clamped function.
    """
    if pred.shape != target.shape:
        raise ValueError(f"pred shape {pred.shape} != target shape {target.shape}")
    p = np.clip(pred, CLAMP_EPS, 1.0 - CLAMP_EPS)
    n = pred.size
    loss = float(-(target * np.log(p) + (1.0 - target) * np.log1p(-p)).sum() / n)
    grad = (p - target) / (p * (1.0 - p)) / n
    active = (pred > CLAMP_EPS) & (pred < 1.0 - CLAMP_EPS)
    grad = np.where(active, grad, 0.0).astype(pred.dtype, copy=False)
    return loss, grad
