"""Layer implementations. Batch-first float64 arrays throughout.

Each layer caches what its backward pass needs during forward; backward
returns the gradient with respect to the layer input and stores parameter
gradients on the layer. Convolution is implemented as cross-correlation
(no kernel flip); with learned kernels the model class is identical to
the flipped-kernel formulation.
"""

from __future__ import annotations

import numpy as np

from ..errors import StageError


class ShapeMismatch(StageError):
    pass


class KernelTooLarge(StageError):
    pass


class InvalidRate(StageError):
    pass


class Layer:
    """Base: parameter-free identity-ish layer."""

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def forward(self, x: np.ndarray, training: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Dense(Layer):
    """Affine map y = x W + b for x of shape (batch, n_in)."""

    def __init__(self, n_in: int, n_out: int):
        self.W = np.zeros((n_in, n_out))
        self.b = np.zeros(n_out)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._x: np.ndarray | None = None

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.dW, self.db]

    def forward(self, x, training=False, rng=None):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.W.shape[0]:
            raise ShapeMismatch(f"dense expects (batch, {self.W.shape[0]}), got {x.shape}")
        self._x = x
        return x @ self.W + self.b

    def backward(self, grad_out):
        x = self._x
        self.dW[...] = x.T @ grad_out
        self.db[...] = grad_out.sum(axis=0)
        return grad_out @ self.W.T


class Conv1D(Layer):
    """Valid cross-correlation over (batch, channels, length) input.

    Kernels have shape (filters, channels, kernel_size); output length is
    length - kernel_size + 1.
    """

    def __init__(self, channels: int, filters: int, kernel_size: int):
        self.K = np.zeros((filters, channels, kernel_size))
        self.b = np.zeros(filters)
        self.dK = np.zeros_like(self.K)
        self.db = np.zeros_like(self.b)
        self._windows: np.ndarray | None = None
        self._in_shape: tuple[int, ...] | None = None

    def params(self):
        return [self.K, self.b]

    def grads(self):
        return [self.dK, self.db]

    def forward(self, x, training=False, rng=None):
        x = np.asarray(x, dtype=np.float64)
        filters, channels, k = self.K.shape
        if x.ndim != 3 or x.shape[1] != channels:
            raise ShapeMismatch(f"conv1d expects (batch, {channels}, length), got {x.shape}")
        if k > x.shape[2]:
            raise KernelTooLarge(f"kernel size {k} exceeds sequence length {x.shape[2]}")
        windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=2)  # (B, C, Lo, k)
        self._windows = windows
        self._in_shape = x.shape
        return np.einsum("bclk,fck->bfl", windows, self.K) + self.b[None, :, None]

    def backward(self, grad_out):
        windows = self._windows
        _, _, k = self.K.shape
        self.dK[...] = np.einsum("bfl,bclk->fck", grad_out, windows)
        self.db[...] = grad_out.sum(axis=(0, 2))
        grad_x = np.zeros(self._in_shape)
        out_len = grad_out.shape[2]
        for j in range(k):
            grad_x[:, :, j : j + out_len] += np.einsum("bfl,fc->bcl", grad_out, self.K[:, :, j])
        return grad_x


class MaxPool1D(Layer):
    """Non-overlapping max pooling with stride == pool_size.

    A trailing window shorter than pool_size is kept and pooled as-is.
    Gradient routes to the earliest maximal index of each window.
    """

    def __init__(self, pool_size: int):
        if pool_size < 1:
            raise ShapeMismatch(f"pool_size must be >= 1, got {pool_size}")
        self.pool = pool_size
        self._argmax: np.ndarray | None = None
        self._in_shape: tuple[int, ...] | None = None
        self._padded_len = 0

    @staticmethod
    def out_length(length: int, pool: int) -> int:
        return -(-length // pool)  # ceil division: remainder window kept

    def forward(self, x, training=False, rng=None):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3:
            raise ShapeMismatch(f"maxpool1d expects (batch, channels, length), got {x.shape}")
        b, c, length = x.shape
        n_win = self.out_length(length, self.pool)
        padded_len = n_win * self.pool
        if padded_len != length:
            pad = np.full((b, c, padded_len - length), -np.inf)
            x_p = np.concatenate([x, pad], axis=2)
        else:
            x_p = x
        windows = x_p.reshape(b, c, n_win, self.pool)
        idx = windows.argmax(axis=3)  # first maximal index on ties
        self._argmax = idx
        self._in_shape = x.shape
        self._padded_len = padded_len
        return np.take_along_axis(windows, idx[..., None], axis=3)[..., 0]

    def backward(self, grad_out):
        b, c, length = self._in_shape
        n_win = grad_out.shape[2]
        routed = np.zeros((b, c, n_win, self.pool))
        np.put_along_axis(routed, self._argmax[..., None], grad_out[..., None], axis=3)
        return routed.reshape(b, c, self._padded_len)[:, :, :length]


class Dropout(Layer):
    """Inverted dropout: scale kept units by 1/(1-rate) while training,
    exact identity at inference."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise InvalidRate(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self._scale: np.ndarray | None = None

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            self._scale = None
            return x
        if rng is None:
            raise StageError("training-mode dropout needs an rng")
        keep = rng.random(x.shape) >= self.rate
        self._scale = keep / (1.0 - self.rate)
        return x * self._scale

    def backward(self, grad_out):
        if self._scale is None:
            return grad_out
        return grad_out * self._scale


class Flatten(Layer):
    def __init__(self):
        self._in_shape: tuple[int, ...] | None = None

    def forward(self, x, training=False, rng=None):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._in_shape)


class SequenceReshape(Layer):
    """Tabular rows (batch, width) viewed as single-channel sequences
    (batch, 1, width) for the convolutional stack."""

    def forward(self, x, training=False, rng=None):
        if x.ndim != 2:
            raise ShapeMismatch(f"expected (batch, width), got {x.shape}")
        return x[:, None, :]

    def backward(self, grad_out):
        return grad_out[:, 0, :]


class Relu(Layer):
    def __init__(self):
        self._x = None

    def forward(self, x, training=False, rng=None):
        self._x = x
        return np.maximum(x, 0.0)

    def backward(self, grad_out):
        return grad_out * (self._x > 0)  # derivative at 0 defined as 0


class Tanh(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x, training=False, rng=None):
        self._y = np.tanh(x)
        return self._y

    def backward(self, grad_out):
        return grad_out * (1.0 - self._y**2)


class Sigmoid(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x, training=False, rng=None):
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        self._y = y
        return y

    def backward(self, grad_out):
        return grad_out * self._y * (1.0 - self._y)


ACTIVATIONS = {"relu": Relu, "tanh": Tanh, "sigmoid": Sigmoid}


def make_activation(kind: str) -> Layer:
    if kind not in ACTIVATIONS:
        raise ShapeMismatch(f"unknown activation {kind!r}; pick one of {sorted(ACTIVATIONS)}")
    return ACTIVATIONS[kind]()
