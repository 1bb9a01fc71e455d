"""Epoch loop and the finite-difference gradient checker."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig
from .losses import loss, loss_grad
from .network import (
    ParameterSet,
    backward_from_cache,
    forward_with_cache,
    routing_from_caches,
)
from .optim import make_optimizer


@dataclass
class TrainConfig:
    loss: str = "bce"
    optimizer: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 100
    batch_size: int = 32
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("lr, epochs, and batch_size must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {k: d[k] for k in
                 ("loss", "optimizer", "lr", "beta1", "beta2", "epsilon",
                  "epochs", "batch_size", "shuffle_seed") if k in d}
        return cls(**known)


@dataclass
class EpochStats:
    loss: float
    accuracy: float
    wall_time_s: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"epochs": [{"loss": e.loss, "accuracy": e.accuracy,
                            "wall_time_s": e.wall_time_s} for e in self.epochs]}


def train(params: ParameterSet, config: NetworkConfig, x: np.ndarray,
          y: np.ndarray, cfg: TrainConfig,
          after_epoch=None) -> TrainHistory:
    """Seeded-shuffle epoch loop; parameters are updated in place.

    Tensors at weighted index <= config.freeze_boundary are bit-identical
    to their initial values on exit. ``after_epoch(epoch, stats)`` may
    return True to stop early.
    """
    x = np.asarray(x, dtype=np.float32)
    y = np.asarray(y, dtype=np.float32)
    n = x.shape[0]
    if n == 0:
        raise ValueError("training set is empty")
    if cfg.batch_size > n:
        raise ValueError("batch_size exceeds dataset size")

    optimizer = make_optimizer(cfg.optimizer, config, lr=cfg.lr,
                               beta1=cfg.beta1, beta2=cfg.beta2,
                               epsilon=cfg.epsilon)
    rng = np.random.default_rng(cfg.shuffle_seed)
    history = TrainHistory()
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        order = rng.permutation(n)
        total_loss = 0.0
        total_correct = 0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            probs, caches = forward_with_cache(params, config, xb)
            total_loss += loss(probs, yb, cfg.loss) * len(idx)
            total_correct += int(((probs >= 0.5) == (yb >= 0.5)).sum())
            dprob = loss_grad(probs, yb, cfg.loss)
            grads = backward_from_cache(params, caches, dprob)
            optimizer.step(params, grads)
        stats = EpochStats(loss=total_loss / n, accuracy=total_correct / n,
                           wall_time_s=time.perf_counter() - start)
        history.epochs.append(stats)
        if after_epoch is not None and after_epoch(epoch, stats):
            break
    return history


def gradient_check(params: ParameterSet, config: NetworkConfig,
                   sample: np.ndarray, target: np.ndarray,
                   loss_kind: str = "bce", epsilon: float = 1e-3,
                   pin_routing: bool = True) -> float:
    """Max relative error between analytic gradients and central finite
    differences, over every parameter (frozen layers included).

    The numeric side runs in float64. With ``pin_routing`` (default) the
    relu masks and maxpool routing observed at the unperturbed point are
    held fixed while stepping, so the difference quotient measures the
    smooth piece whose derivative backprop computes; stepping across an
    activation kink would otherwise invalidate the quotient itself.
    Relative error is |a - n| / max(|a|, |n|, 1e-8).
    """
    work = params.astype(np.float64)
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim == len(config.input_shape):
        x = x[None]
    y = np.asarray(target, dtype=np.float64).reshape(-1)

    probs, caches = forward_with_cache(work, config, x)
    analytic = backward_from_cache(work, caches, loss_grad(probs, y, loss_kind))
    routing = routing_from_caches(caches) if pin_routing else None

    def loss_at() -> float:
        p, _ = forward_with_cache(work, config, x, routing=routing)
        return loss(p, y, loss_kind)

    worst = 0.0
    for entry, (dw, db) in zip(work.entries, analytic.entries):
        for tensor, grad in ((entry.weight, dw), (entry.bias, db)):
            flat = tensor.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + epsilon
                up = loss_at()
                flat[i] = orig - epsilon
                down = loss_at()
                flat[i] = orig
                numeric = (up - down) / (2.0 * epsilon)
                denom = max(abs(gflat[i]), abs(numeric), 1e-8)
                worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
