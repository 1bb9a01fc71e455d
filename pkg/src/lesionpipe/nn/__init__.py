"""From-scratch neural network core: VGG-style stack with a sigmoid head,
backpropagation, SGD/Adam, freeze-boundary transfer learning, gradient
checking, and weight serialization."""

from .config import (
    ARCHITECTURES,
    LayerSpec,
    NetworkConfig,
    ShapeError,
    architecture,
    conv3x3,
    dense,
    flatten,
    layer_output_shapes,
    maxpool2x2,
    relu,
    sigmoid,
    small_config,
    vgg16_config,
)
from .losses import loss, loss_grad
from .network import (
    Gradients,
    LayerParams,
    ParameterSet,
    backward,
    build_network,
    forward,
    forward_with_cache,
)
from .optim import Adam, Sgd, make_optimizer
from .training import EpochStats, TrainConfig, TrainHistory, gradient_check, train
from .weights_io import (
    BadMagicError,
    ConfigMismatchError,
    TruncatedTensorError,
    VersionMismatchError,
    WeightFormatError,
    load_weights,
    save_weights,
)

__all__ = [
    "ARCHITECTURES", "Adam", "BadMagicError", "ConfigMismatchError",
    "EpochStats", "Gradients", "LayerParams", "LayerSpec", "NetworkConfig",
    "ParameterSet", "Sgd", "ShapeError", "TrainConfig", "TrainHistory",
    "TruncatedTensorError", "VersionMismatchError", "WeightFormatError",
    "architecture", "backward", "build_network", "conv3x3", "dense",
    "flatten", "forward", "forward_with_cache", "gradient_check",
    "layer_output_shapes", "load_weights", "loss", "loss_grad",
    "make_optimizer", "maxpool2x2", "relu", "save_weights", "sigmoid",
    "small_config", "train", "vgg16_config",
]
