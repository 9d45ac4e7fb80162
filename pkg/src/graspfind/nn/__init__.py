"""Minimal dependency-free neural stack for the two detection networks."""

from .layers import (
    Conv2d,
    Flatten,
    Linear,
    Network,
    NetworkSpec,
    ReLU,
    ShapeMismatch,
    Sigmoid,
    build_network,
)
from .loss import bce_loss
from .optim import SGD, TrainConfig
from .train import EmptyDataset, TrainResult, train, write_loss_log
from .weights_io import LoadedModel, load_weights, save_weights

__all__ = [
    "Conv2d",
    "Flatten",
    "Linear",
    "Network",
    "NetworkSpec",
    "ReLU",
    "ShapeMismatch",
    "Sigmoid",
    "build_network",
    "bce_loss",
    "SGD",
    "TrainConfig",
    "EmptyDataset",
    "TrainResult",
    "train",
    "write_loss_log",
    "LoadedModel",
    "load_weights",
    "save_weights",
]
