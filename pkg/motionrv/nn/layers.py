"""Layers with explicit forward and backward passes.

Every layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``grads`` during ``backward``.
Tensors are float64, laid out ``(batch, channels, length)`` for the
convolutional part and ``(batch, features)`` after pooling.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from motionrv.errors import ShapeError


class Layer:
    r"""Base class; parameter-free layers keep empty dicts"""
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grad(self) -> None:
        for name, value in self.params.items():
            self.grads[name] = np.zeros_like(value)

    def spec(self) -> str:
        return self.kind


class Conv1d(Layer):
    r"""Stride-1 convolution with symmetric zero ("same") padding"""
    kind = "conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 rng: np.random.Generator | None = None):
        super().__init__()
        if kernel % 2 != 1:
            raise ShapeError(f"conv kernel must be odd, got {kernel}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.params["weight"] = np.zeros((out_channels, in_channels, kernel))
        self.params["bias"] = np.zeros(out_channels)
        if rng is not None:
            self.params["weight"] = he_uniform(rng, in_channels * kernel,
                                               self.params["weight"].shape)
        self.zero_grad()
        self._cols: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(f"conv1d expects (B, {self.in_channels}, L), "
                             f"got {x.shape}")
        pad = self.kernel // 2
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
        # (B, C, L, K) view of every receptive field
        cols = sliding_window_view(padded, self.kernel, axis=2)
        self._cols = cols
        out = np.tensordot(cols, self.params["weight"], axes=([1, 3], [1, 2]))
        return out.transpose(0, 2, 1) + self.params["bias"][None, :, None]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        cols = self._cols
        weight = self.params["weight"]
        self.grads["weight"] += np.tensordot(grad, cols,
                                             axes=([0, 2], [0, 2]))
        self.grads["bias"] += grad.sum(axis=(0, 2))
        batch, _, length = grad.shape
        pad = self.kernel // 2
        grad_padded = np.zeros((batch, self.in_channels, length + 2 * pad))
        for j in range(self.kernel):
            grad_padded[:, :, j:j + length] += np.tensordot(
                weight[:, :, j], grad, axes=([0], [1])).transpose(1, 0, 2)
        return grad_padded[:, :, pad:pad + length]

    def spec(self) -> str:
        return f"conv1d({self.in_channels},{self.out_channels},{self.kernel})"


class ReLU(Layer):
    kind = "relu"

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return np.where(self._mask, grad, 0.0)


class MaxPool1d(Layer):
    r"""Non-overlapping max pooling; a trailing remainder is dropped and
    ties go to the lowest index."""
    kind = "maxpool"

    def __init__(self, size: int = 2):
        super().__init__()
        self.size = size

    def output_length(self, length: int) -> int:
        return length // self.size

    def forward(self, x: np.ndarray) -> np.ndarray:
        batch, channels, length = x.shape
        n_out = self.output_length(length)
        if n_out < 1:
            raise ShapeError(f"maxpool({self.size}) needs length >= "
                             f"{self.size}, got {length}")
        blocks = x[:, :, :n_out * self.size].reshape(batch, channels, n_out,
                                                     self.size)
        # np.argmax returns the first maximal index
        self._argmax = blocks.argmax(axis=3)
        self._input_length = length
        return np.take_along_axis(blocks, self._argmax[..., None],
                                  axis=3)[..., 0]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        batch, channels, n_out = grad.shape
        blocks = np.zeros((batch, channels, n_out, self.size))
        np.put_along_axis(blocks, self._argmax[..., None], grad[..., None],
                          axis=3)
        out = np.zeros((batch, channels, self._input_length))
        out[:, :, :n_out * self.size] = blocks.reshape(batch, channels, -1)
        return out

    def spec(self) -> str:
        return f"maxpool({self.size})"


class GlobalAvgPool(Layer):
    r"""Mean over the time axis: ``(B, C, L) -> (B, C)``"""
    kind = "gap"

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._length = x.shape[2]
        return x.mean(axis=2)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return np.repeat(grad[:, :, None] / self._length, self._length,
                         axis=2)


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.params["weight"] = np.zeros((out_features, in_features))
        self.params["bias"] = np.zeros(out_features)
        if rng is not None:
            self.params["weight"] = he_uniform(rng, in_features,
                                               self.params["weight"].shape)
        self.zero_grad()

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"dense expects (B, {self.in_features}), "
                             f"got {x.shape}")
        self._input = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self.grads["weight"] += grad.T @ self._input
        self.grads["bias"] += grad.sum(axis=0)
        return grad @ self.params["weight"]

    def spec(self) -> str:
        return f"dense({self.in_features},{self.out_features})"


def he_uniform(rng: np.random.Generator, fan_in: int,
               shape: tuple[int, ...]) -> np.ndarray:
    """He-uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in))."""
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)
