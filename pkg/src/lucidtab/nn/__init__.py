"""Minimal deterministic neural-network engine with exact manual backprop.

Dense and 1-D convolution layers, max pooling, relu/tanh/sigmoid
activations, inverted dropout, binary cross-entropy, and sgd/rmsprop/adam
optimizers. Everything runs on float64 numpy arrays; every gradient is
checked against central finite differences in the test suite.
"""

from .layers import (
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    InvalidRate,
    KernelTooLarge,
    MaxPool1D,
    Relu,
    SequenceReshape,
    ShapeMismatch,
    Sigmoid,
    Tanh,
)
from .losses import bce_loss
from .network import Network, NetworkSpec, build_network, cnn_spec, mlp_spec
from .optim import Optimizer, make_optimizer

__all__ = [
    "Conv1D",
    "Dense",
    "Dropout",
    "Flatten",
    "InvalidRate",
    "KernelTooLarge",
    "MaxPool1D",
    "Network",
    "NetworkSpec",
    "Optimizer",
    "Relu",
    "SequenceReshape",
    "ShapeMismatch",
    "Sigmoid",
    "Tanh",
    "bce_loss",
    "build_network",
    "cnn_spec",
    "make_optimizer",
    "mlp_spec",
]
