"""SGD and Adam parameter updates.

Freezing is enforced here, not in backprop: gradients exist for every
layer, but tensors at or below the freeze boundary are never touched and
Adam allocates no moment state for them.
"""
from __future__ import annotations

import numpy as np

from .config import NetworkConfig
from .network import Gradients, ParameterSet


class Sgd:
    def __init__(self, config: NetworkConfig, lr: float = 1e-3):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.lr = lr
        self.trainable = config.trainable_mask()

    def step(self, params: ParameterSet, grads: Gradients) -> None:
        for trainable, entry, (dw, db) in zip(self.trainable, params.entries,
                                              grads.entries):
            if not trainable:
                continue
            entry.weight -= (self.lr * dw).astype(entry.weight.dtype, copy=False)
            entry.bias -= (self.lr * db).astype(entry.bias.dtype, copy=False)


class Adam:
    def __init__(self, config: NetworkConfig, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        if lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError("betas must be in [0, 1)")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.trainable = config.trainable_mask()
        self._moments: list[tuple[np.ndarray, ...] | None] = None  # lazy

    def _init_moments(self, params: ParameterSet) -> None:
        self._moments = []
        for trainable, entry in zip(self.trainable, params.entries):
            if trainable:
                self._moments.append((np.zeros_like(entry.weight),
                                      np.zeros_like(entry.bias),
                                      np.zeros_like(entry.weight),
                                      np.zeros_like(entry.bias)))
            else:
                self._moments.append(None)

    def step(self, params: ParameterSet, grads: Gradients) -> None:
        if self._moments is None:
            self._init_moments(params)
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for trainable, entry, (dw, db), moments in zip(
                self.trainable, params.entries, grads.entries, self._moments):
            if not trainable:
                continue
            mw, mb, vw, vb = moments
            for m, v, g, tensor in ((mw, vw, dw, entry.weight),
                                    (mb, vb, db, entry.bias)):
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                m_hat = m / bc1
                v_hat = v / bc2
                tensor -= (self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)).astype(
                    tensor.dtype, copy=False)


def make_optimizer(kind: str, config: NetworkConfig, lr: float = 1e-3,
                   beta1: float = 0.9, beta2: float = 0.999,
                   epsilon: float = 1e-8):
    if kind == "sgd":
        return Sgd(config, lr=lr)
    if kind == "adam":
        return Adam(config, lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)
    raise ValueError(f"unknown optimizer {kind!r}")
