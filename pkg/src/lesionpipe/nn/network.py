"""Forward and backward passes for the conv/dense stack.

Batches are float arrays shaped (N, C, H, W); the head emits one malignant
probability per sample. Arithmetic runs in the dtype of the parameters
(float32 in production; the gradient checker uses float64).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig, ShapeError, layer_output_shapes


@dataclass
class LayerParams:
    name: str
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class ParameterSet:
    """Weights and biases for every parameterized layer, in stack order."""

    entries: list[LayerParams]

    def copy(self) -> "ParameterSet":
        return ParameterSet([LayerParams(e.name, e.weight.copy(), e.bias.copy())
                             for e in self.entries])

    def astype(self, dtype) -> "ParameterSet":
        return ParameterSet([LayerParams(e.name, e.weight.astype(dtype),
                                         e.bias.astype(dtype))
                             for e in self.entries])

    def num_parameters(self) -> int:
        return sum(e.weight.size + e.bias.size for e in self.entries)

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([e.weight.ravel(), e.bias.ravel()])
                               for e in self.entries])


@dataclass
class Gradients:
    """d(loss)/d(parameter), aligned with ParameterSet.entries."""

    entries: list[tuple[np.ndarray, np.ndarray]]  # (d_weight, d_bias)

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([dw.ravel(), db.ravel()])
                               for dw, db in self.entries])


def build_network(config: NetworkConfig, init_seed: int) -> ParameterSet:
    """He-uniform weights, zero biases; deterministic per seed."""
    shapes = layer_output_shapes(config)
    rng = np.random.default_rng(init_seed)
    entries: list[LayerParams] = []
    weighted = 0
    in_shape: tuple[int, ...] = tuple(config.input_shape)
    for spec, out_shape in zip(config.layers, shapes):
        if spec.kind == "conv3x3":
            fan_in = in_shape[0] * 9
            limit = math.sqrt(6.0 / fan_in)
            w = rng.uniform(-limit, limit,
                            (spec.out_channels, in_shape[0], 3, 3)).astype(np.float32)
            b = np.zeros(spec.out_channels, dtype=np.float32)
            entries.append(LayerParams(f"conv{weighted:02d}", w, b))
            weighted += 1
        elif spec.kind == "dense":
            fan_in = in_shape[0]
            limit = math.sqrt(6.0 / fan_in)
            w = rng.uniform(-limit, limit,
                            (spec.out_units, fan_in)).astype(np.float32)
            b = np.zeros(spec.out_units, dtype=np.float32)
            entries.append(LayerParams(f"dense{weighted:02d}", w, b))
            weighted += 1
        in_shape = out_shape
    return ParameterSet(entries)


def _conv_cols(x: np.ndarray) -> np.ndarray:
    """im2col for a 3x3 window, pad 1, stride 1: (N, H*W, C*9)."""
    n, c, h, w = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(2, 3))
    # (N, C, H, W, 3, 3) -> (N, H, W, C, 3, 3) -> (N, H*W, C*9)
    return np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(n, h * w, c * 9)


def _conv_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    n, _, h, w = x.shape
    cols = _conv_cols(x)
    out = cols @ weight.reshape(weight.shape[0], -1).T + bias
    return out.reshape(n, h, w, weight.shape[0]).transpose(0, 3, 1, 2)


def _conv_backward(x, weight, dout):
    n, c, h, w = x.shape
    cout = weight.shape[0]
    dout_rows = dout.transpose(0, 2, 3, 1).reshape(n * h * w, cout)
    cols = _conv_cols(x).reshape(n * h * w, c * 9)
    dw = (dout_rows.T @ cols).reshape(cout, c, 3, 3)
    db = dout.sum(axis=(0, 2, 3))
    # input gradient: correlate dout with the 180-degree-rotated, channel-
    # swapped kernels (transpose of the forward correlation)
    w_rot = weight[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    dx = _conv_forward(dout, np.ascontiguousarray(w_rot),
                       np.zeros(c, dtype=weight.dtype))
    return dx, dw, db


def _pool_split(x: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    return (x.reshape(n, c, h // 2, 2, w // 2, 2)
             .transpose(0, 1, 2, 4, 3, 5)
             .reshape(n, c, h // 2, w // 2, 4))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(params: ParameterSet, config: NetworkConfig,
            batch: np.ndarray) -> np.ndarray:
    """Malignant probability per sample, shape (N,)."""
    probs, _ = forward_with_cache(params, config, batch)
    return probs


def forward_with_cache(params: ParameterSet, config: NetworkConfig,
                       batch: np.ndarray, routing: list | None = None):
    """Forward pass retaining per-layer caches for backprop.

    When ``routing`` (from a previous call's cache) is supplied, relu masks
    and maxpool routing are pinned to that call's choices instead of being
    recomputed; conv/dense/sigmoid still use the current parameters. The
    gradient checker uses this to finite-difference the smooth piece the
    chain rule differentiates.
    """
    x = np.asarray(batch)
    if x.shape[1:] != tuple(config.input_shape):
        raise ShapeError(f"batch shape {x.shape[1:]} != input {config.input_shape}")
    layer_output_shapes(config)  # validate structure

    caches: list = []
    widx = 0
    route_iter = iter(routing) if routing is not None else None
    for spec in config.layers:
        if spec.kind == "conv3x3":
            entry = params.entries[widx]
            caches.append(("conv3x3", x, widx))
            x = _conv_forward(x, entry.weight, entry.bias)
            widx += 1
        elif spec.kind == "relu":
            if route_iter is not None:
                mask = next(route_iter)
            else:
                mask = x > 0
            caches.append(("relu", mask, None))
            x = x * mask
        elif spec.kind == "maxpool2x2":
            windows = _pool_split(x)
            if route_iter is not None:
                idx = next(route_iter)
            else:
                idx = windows.argmax(axis=-1)
            caches.append(("maxpool2x2", (x.shape, idx), None))
            x = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
        elif spec.kind == "flatten":
            caches.append(("flatten", x.shape, None))
            x = x.reshape(x.shape[0], -1)
        elif spec.kind == "dense":
            entry = params.entries[widx]
            caches.append(("dense", x, widx))
            x = x @ entry.weight.T + entry.bias
            widx += 1
        elif spec.kind == "sigmoid":
            x = _sigmoid(x)
            caches.append(("sigmoid", x, None))
    return x[:, 0], caches


def routing_from_caches(caches: list) -> list:
    """Extract the relu/maxpool routing decisions for pinned re-evaluation."""
    routes = []
    for kind, payload, _ in caches:
        if kind == "relu":
            routes.append(payload)
        elif kind == "maxpool2x2":
            routes.append(payload[1])
    return routes


def backward(params: ParameterSet, config: NetworkConfig, batch: np.ndarray,
             targets: np.ndarray, loss_kind: str = "bce") -> Gradients:
    """Gradients for every parameterized layer, frozen ones included
    (freezing is the optimizer's concern)."""
    from .losses import loss_grad

    probs, caches = forward_with_cache(params, config, batch)
    dprob = loss_grad(probs, np.asarray(targets), loss_kind)
    return backward_from_cache(params, caches, dprob)


def backward_from_cache(params: ParameterSet, caches: list,
                        dprob: np.ndarray) -> Gradients:
    grads: list[tuple[np.ndarray, np.ndarray] | None] = [None] * len(params.entries)
    dx: np.ndarray = dprob[:, None]
    for kind, payload, widx in reversed(caches):
        if kind == "sigmoid":
            p = payload  # (N, 1) head output
            dx = dx * (p * (1.0 - p))
        elif kind == "dense":
            x = payload
            entry = params.entries[widx]
            grads[widx] = (dx.T @ x, dx.sum(axis=0))
            dx = dx @ entry.weight
        elif kind == "flatten":
            dx = dx.reshape(payload)
        elif kind == "maxpool2x2":
            shape, idx = payload
            n, c, h, w = shape
            dwin = np.zeros((n, c, h // 2, w // 2, 4), dtype=dx.dtype)
            np.put_along_axis(dwin, idx[..., None], dx[..., None], axis=-1)
            dx = (dwin.reshape(n, c, h // 2, w // 2, 2, 2)
                      .transpose(0, 1, 2, 4, 3, 5)
                      .reshape(n, c, h, w))
        elif kind == "relu":
            dx = dx * payload
        elif kind == "conv3x3":
            x = payload
            entry = params.entries[widx]
            dx, dw, db = _conv_backward(x, entry.weight, dx)
            grads[widx] = (dw, db)
    return Gradients([g for g in grads])  # type: ignore[arg-type]
