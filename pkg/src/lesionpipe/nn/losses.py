"""Binary classification losses over sigmoid probabilities.

Predictions are clamped to [eps, 1-eps] before either loss so both stay
finite; gradients are zero where the clamp is active.
"""
from __future__ import annotations

import numpy as np

LOSS_KINDS = ("bce", "half_squared")
CLAMP_EPS = 1e-7


def _clamped(pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.clip(pred, CLAMP_EPS, 1.0 - CLAMP_EPS)
    active = (pred > CLAMP_EPS) & (pred < 1.0 - CLAMP_EPS)
    return p, active


def loss(pred: np.ndarray, target: np.ndarray, kind: str = "bce") -> float:
    """Mean loss over the batch; bce = -[y ln p + (1-y) ln(1-p)],
    half_squared = (p - y)^2 / 2."""
    pred = np.asarray(pred, dtype=np.result_type(pred, np.float32))
    target = np.asarray(target, dtype=pred.dtype)
    p, _ = _clamped(pred)
    if kind == "bce":
        per = -(target * np.log(p) + (1.0 - target) * np.log1p(-p))
    elif kind == "half_squared":
        per = 0.5 * (p - target) ** 2
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return float(per.mean())


def loss_grad(pred: np.ndarray, target: np.ndarray, kind: str = "bce") -> np.ndarray:
    """d(mean loss)/d(pred), zero where the clamp saturates."""
    pred = np.asarray(pred)
    target = np.asarray(target, dtype=pred.dtype)
    p, active = _clamped(pred)
    n = pred.shape[0]
    if kind == "bce":
        g = (p - target) / (p * (1.0 - p)) / n
    elif kind == "half_squared":
        g = (p - target) / n
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return np.where(active, g, 0.0)
