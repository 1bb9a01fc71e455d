"""Network configuration: layer specs, shape propagation, and the stock
architectures (full VGG-16-style stack and a desk-scale reduction)."""
from __future__ import annotations

from dataclasses import dataclass, field

LAYER_KINDS = ("conv3x3", "relu", "maxpool2x2", "flatten", "dense", "sigmoid")

# conv3x3 is fixed stride 1, pad 1; maxpool2x2 is fixed stride 2.


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int | None = None  # conv3x3
    out_units: int | None = None     # dense

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv3x3" and (self.out_channels or 0) < 1:
            raise ValueError("conv3x3 needs out_channels >= 1")
        if self.kind == "dense" and (self.out_units or 0) < 1:
            raise ValueError("dense needs out_units >= 1")

    @property
    def has_params(self) -> bool:
        return self.kind in ("conv3x3", "dense")


def conv3x3(out_channels: int) -> LayerSpec:
    return LayerSpec("conv3x3", out_channels=out_channels)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def maxpool2x2() -> LayerSpec:
    return LayerSpec("maxpool2x2")


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def dense(out_units: int) -> LayerSpec:
    return LayerSpec("dense", out_units=out_units)


def sigmoid() -> LayerSpec:
    return LayerSpec("sigmoid")


class ShapeError(ValueError):
    """Raised when layer shapes do not propagate consistently."""


@dataclass
class NetworkConfig:
    """Ordered layer stack with a transfer-learning freeze boundary.

    ``freeze_boundary`` is an ordinal over the *parameterized* layers
    (conv/dense); entries at weighted index <= freeze_boundary are never
    updated by the optimizer. -1 means nothing is frozen.
    """

    input_shape: tuple[int, int, int]  # (channels, height, width)
    layers: list[LayerSpec] = field(default_factory=list)
    freeze_boundary: int = -1

    def weighted_layers(self) -> list[tuple[int, LayerSpec]]:
        return [(i, spec) for i, spec in enumerate(self.layers) if spec.has_params]

    def trainable_mask(self) -> list[bool]:
        """One flag per parameterized layer, False where frozen."""
        return [w > self.freeze_boundary
                for w, _ in enumerate(self.weighted_layers())]

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "freeze_boundary": self.freeze_boundary,
            "layers": [
                {k: v for k, v in
                 (("kind", s.kind), ("out_channels", s.out_channels),
                  ("out_units", s.out_units)) if v is not None}
                for s in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        layers = [LayerSpec(kind=entry["kind"],
                            out_channels=entry.get("out_channels"),
                            out_units=entry.get("out_units"))
                  for entry in d["layers"]]
        return cls(input_shape=tuple(d["input_shape"]), layers=layers,
                   freeze_boundary=int(d.get("freeze_boundary", -1)))


def layer_output_shapes(config: NetworkConfig) -> list[tuple[int, ...]]:
    """Propagate shapes through the stack, validating structure:
    sigmoid only as the last layer, flatten before any dense, and the final
    output a single unit."""
    shape: tuple[int, ...] = tuple(config.input_shape)
    shapes = []
    seen_flatten = False
    for i, spec in enumerate(config.layers):
        last = i == len(config.layers) - 1
        if spec.kind == "conv3x3":
            if len(shape) != 3:
                raise ShapeError(f"layer {i}: conv3x3 needs (C, H, W), got {shape}")
            shape = (spec.out_channels, shape[1], shape[2])
        elif spec.kind == "relu":
            pass
        elif spec.kind == "maxpool2x2":
            if len(shape) != 3:
                raise ShapeError(f"layer {i}: maxpool needs (C, H, W), got {shape}")
            c, h, w = shape
            if h % 2 or w % 2:
                raise ShapeError(f"layer {i}: maxpool2x2 needs even dims, got {h}x{w}")
            shape = (c, h // 2, w // 2)
        elif spec.kind == "flatten":
            if len(shape) != 3:
                raise ShapeError(f"layer {i}: flatten needs (C, H, W), got {shape}")
            seen_flatten = True
            shape = (shape[0] * shape[1] * shape[2],)
        elif spec.kind == "dense":
            if len(shape) != 1:
                if not seen_flatten:
                    raise ShapeError(f"layer {i}: dense requires a preceding flatten")
                raise ShapeError(f"layer {i}: dense needs a flat input, got {shape}")
            shape = (spec.out_units,)
        elif spec.kind == "sigmoid":
            if not last:
                raise ShapeError(f"layer {i}: sigmoid must be the final layer")
            if len(shape) != 1 or shape[0] != 1:
                raise ShapeError(f"sigmoid head needs a single unit, got {shape}")
        shapes.append(shape)
    if not config.layers or config.layers[-1].kind != "sigmoid":
        raise ShapeError("network must end in a sigmoid head")
    return shapes


def vgg16_config(input_shape: tuple[int, int, int] = (3, 224, 224)) -> NetworkConfig:
    """The 16-weighted-layer stack with a sigmoid head replacing softmax.

    Conv blocks (64,64)(128,128)(256,256,256)(512,512,512)(512,512,512),
    each followed by a 2x2 maxpool, then dense 4096, 4096, 1. The freeze
    boundary covers weighted layers 0..14 (all 13 convs plus the first two
    dense layers), leaving only the final dense trainable.
    """
    layers: list[LayerSpec] = []
    for block in ((64, 64), (128, 128), (256, 256, 256),
                  (512, 512, 512), (512, 512, 512)):
        for ch in block:
            layers += [conv3x3(ch), relu()]
        layers.append(maxpool2x2())
    layers.append(flatten())
    layers += [dense(4096), relu(), dense(4096), relu(), dense(1), sigmoid()]
    return NetworkConfig(input_shape=input_shape, layers=layers, freeze_boundary=14)


def small_config(input_shape: tuple[int, int, int] = (3, 32, 32)) -> NetworkConfig:
    """Desk-scale reduction used for CI-speed training runs."""
    layers = [
        conv3x3(8), relu(), maxpool2x2(),
        conv3x3(16), relu(), maxpool2x2(),
        flatten(),
        dense(32), relu(),
        dense(1), sigmoid(),
    ]
    return NetworkConfig(input_shape=input_shape, layers=layers)


ARCHITECTURES = {"vgg16": vgg16_config, "small": small_config}


def architecture(name: str, input_shape: tuple[int, int, int]) -> NetworkConfig:
    if name not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {name!r}")
    return ARCHITECTURES[name](input_shape)
