"""Network assembly: declarative layer specs, seeded initialization, and
the forward/backward driver.

A spec is a tuple of layer descriptors ending in a single ("output",)
entry, which expands to Dense(1) + sigmoid. Tabular input feeding a
convolutional stack is viewed as a single-channel sequence in column
order. Initialization is Glorot-style uniform (limit sqrt(6/(fan_in +
fan_out))) drawn from a PCG64 stream, biases zero, so a (spec, seed) pair
fully determines the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import make_rng
from .layers import (
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    KernelTooLarge,
    Layer,
    MaxPool1D,
    SequenceReshape,
    ShapeMismatch,
    Sigmoid,
    make_activation,
)
from .losses import bce_loss


@dataclass(frozen=True)
class NetworkSpec:
    """Declarative architecture: input width plus layer descriptors.

    Descriptors:
        ("dense", units, activation)
        ("conv1d", filters, kernel_size, activation)
        ("maxpool1d", pool_size)
        ("dropout", rate)
        ("flatten",)
        ("output",)            # Dense(1) + sigmoid, must be last
    """

    input_width: int
    layers: tuple[tuple, ...]
    kind: str = "custom"

    def __post_init__(self):
        if not self.layers or self.layers[-1] != ("output",):
            raise ShapeMismatch("spec must end with a single ('output',) layer")
        if sum(1 for d in self.layers if d[0] == "output") != 1:
            raise ShapeMismatch("spec must contain exactly one output layer")

    def to_jsonable(self) -> dict:
        return {"input_width": self.input_width, "layers": [list(d) for d in self.layers], "kind": self.kind}

    @staticmethod
    def from_jsonable(obj: dict) -> "NetworkSpec":
        return NetworkSpec(
            input_width=int(obj["input_width"]),
            layers=tuple(tuple(d) for d in obj["layers"]),
            kind=str(obj.get("kind", "custom")),
        )


def mlp_spec(input_width: int, hidden: int, activation: str, dropout: float) -> NetworkSpec:
    return NetworkSpec(
        input_width=input_width,
        layers=(("dense", hidden, activation), ("dropout", dropout), ("output",)),
        kind="mlp",
    )


def cnn_spec(
    input_width: int,
    filters: int,
    kernel_size: int,
    pool_size: int,
    activation: str,
    dropout: float,
    dense_units: int = 64,
) -> NetworkSpec:
    return NetworkSpec(
        input_width=input_width,
        layers=(
            ("conv1d", filters, kernel_size, activation),
            ("maxpool1d", pool_size),
            ("dropout", dropout),
            ("flatten",),
            ("dense", dense_units, activation),
            ("dropout", dropout),
            ("output",),
        ),
        kind="cnn",
    )


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Network:
    """Layer stack built from a spec; owns parameters and their gradients."""

    def __init__(self, spec: NetworkSpec, layers: list[Layer]):
        self.spec = spec
        self.layers = layers

    # -- parameter access -------------------------------------------------

    def params(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def grads(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend(layer.grads())
        return out

    def get_weights(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params()]

    def set_weights(self, weights: list[np.ndarray]) -> None:
        params = self.params()
        if len(params) != len(weights):
            raise ShapeMismatch("weight list does not match network parameters")
        for p, w in zip(params, weights):
            if p.shape != w.shape:
                raise ShapeMismatch(f"weight shape {w.shape} != parameter shape {p.shape}")
            p[...] = w

    # -- passes ------------------------------------------------------------

    def forward(self, X: np.ndarray, training: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        x = np.asarray(X, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.spec.input_width:
            raise ShapeMismatch(f"expected input width {self.spec.input_width}, got {x.shape[1]}")
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x[:, 0]

    def backward(self, grad_probs: np.ndarray) -> np.ndarray:
        g = np.asarray(grad_probs, dtype=np.float64)[:, None]
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Deterministic inference pass (dropout disabled)."""
        return self.forward(X, training=False)

    def train_step(
        self,
        X: np.ndarray,
        y: np.ndarray,
        optimizer,
        rng: np.random.Generator,
        l1: float = 0.0,
        l2: float = 0.0,
    ) -> float:
        """One forward/backward/update on a batch; returns the data loss."""
        probs = self.forward(X, training=True, rng=rng)
        loss, grad = bce_loss(probs, y)
        self.backward(grad)
        if l1 or l2:
            for layer in self.layers:
                if isinstance(layer, Dense):
                    layer.dW += l2 * layer.W + l1 * np.sign(layer.W)
                elif isinstance(layer, Conv1D):
                    layer.dK += l2 * layer.K + l1 * np.sign(layer.K)
        optimizer.step(self.params(), self.grads())
        return loss


def build_network(spec: NetworkSpec, seed: int) -> Network:
    """Instantiate and initialize a network; shapes are validated by
    chaining them through the descriptors."""
    rng = make_rng(seed)
    layers: list[Layer] = []
    shape: tuple[int, ...] = (spec.input_width,)  # (width,) or (channels, length)

    for desc in spec.layers:
        kind = desc[0]
        if kind == "conv1d":
            _, filters, k, activation = desc
            if len(shape) == 1:
                layers.append(SequenceReshape())
                shape = (1, shape[0])
            channels, length = shape
            if k > length:
                raise KernelTooLarge(f"kernel size {k} exceeds sequence length {length}")
            conv = Conv1D(channels, filters, k)
            conv.K[...] = _glorot(rng, conv.K.shape, fan_in=channels * k, fan_out=filters * k)
            layers.append(conv)
            layers.append(make_activation(activation))
            shape = (filters, length - k + 1)
        elif kind == "maxpool1d":
            (_, pool) = desc
            if len(shape) != 2:
                raise ShapeMismatch("maxpool1d needs a (channels, length) input")
            layers.append(MaxPool1D(pool))
            shape = (shape[0], MaxPool1D.out_length(shape[1], pool))
        elif kind == "dropout":
            (_, rate) = desc
            layers.append(Dropout(rate))
        elif kind == "flatten":
            layers.append(Flatten())
            shape = (int(np.prod(shape)),)
        elif kind == "dense":
            _, units, activation = desc
            if len(shape) != 1:
                layers.append(Flatten())
                shape = (int(np.prod(shape)),)
            dense = Dense(shape[0], units)
            dense.W[...] = _glorot(rng, dense.W.shape, fan_in=shape[0], fan_out=units)
            layers.append(dense)
            layers.append(make_activation(activation))
            shape = (units,)
        elif kind == "output":
            if len(shape) != 1:
                layers.append(Flatten())
                shape = (int(np.prod(shape)),)
            dense = Dense(shape[0], 1)
            dense.W[...] = _glorot(rng, dense.W.shape, fan_in=shape[0], fan_out=1)
            layers.append(dense)
            layers.append(Sigmoid())
            shape = (1,)
        else:
            raise ShapeMismatch(f"unknown layer descriptor {desc!r}")
    return Network(spec, layers)
