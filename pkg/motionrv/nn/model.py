import re
from dataclasses import dataclass

import numpy as np

from motionrv.constants import DEFAULT_WINDOW_LEN
from motionrv.errors import NonFiniteError, ShapeError
from motionrv.nn.layers import (Conv1d, Dense, GlobalAvgPool, Layer,
                                MaxPool1d, ReLU)

N_TARGETS = 3


@dataclass(frozen=True)
class Architecture:
    r"""Layer widths of the regressor.

    The default chain is conv(in->32,k5) relu maxpool2 conv(32->64,k5) relu
    maxpool2 conv(64->64,k3) relu global-average-pool dense(64->32) relu
    dense(32->3). Every conv except the last is followed by a max-pool.
    """
    conv_channels: tuple[int, ...] = (32, 64, 64)
    kernels: tuple[int, ...] = (5, 5, 3)
    hidden: int = 32
    pool: int = 2

    def __post_init__(self):
        if len(self.conv_channels) != len(self.kernels) or \
                not self.conv_channels:
            raise ShapeError("conv_channels and kernels must be non-empty "
                             "and the same length")

    def final_length(self, window_len: int) -> int:
        length = window_len
        for _ in self.conv_channels[:-1]:
            length //= self.pool
        return length


class CnnModel:
    r"""1D-CNN mapping a ``(B, C, window_len)`` block to ``(B, 3)`` RV
    estimates at the window's first, middle and last frame.

    Weights are He-uniform from ``seed`` and biases start at zero;
    ``seed=None`` leaves every parameter at zero for checkpoint loading.
    ``zero_head`` zeroes the final dense layer.
    """

    def __init__(self,
                 in_channels: int,
                 window_len: int = DEFAULT_WINDOW_LEN,
                 architecture: Architecture = Architecture(),
                 seed: int | None = 0,
                 zero_head: bool = False):
        self.in_channels = in_channels
        self.window_len = window_len
        self.architecture = architecture
        if architecture.final_length(window_len) < 1:
            raise ShapeError(f"window of {window_len} frames is too short "
                             f"for {len(architecture.kernels) - 1} pooling "
                             f"stages")
        rng = np.random.default_rng(seed) if seed is not None else None

        self.layers: list[tuple[str, Layer]] = []
        width = in_channels
        n_conv = len(architecture.conv_channels)
        for i, (out, kernel) in enumerate(
                zip(architecture.conv_channels, architecture.kernels)):
            self.layers.append((f"conv{i + 1}",
                                Conv1d(width, out, kernel, rng)))
            self.layers.append((f"relu{i + 1}", ReLU()))
            if i < n_conv - 1:
                self.layers.append((f"pool{i + 1}",
                                    MaxPool1d(architecture.pool)))
            width = out
        self.layers.append(("gap", GlobalAvgPool()))
        self.layers.append(("dense1", Dense(width, architecture.hidden,
                                            rng)))
        self.layers.append((f"relu{n_conv + 1}", ReLU()))
        self.layers.append(("head", Dense(architecture.hidden, N_TARGETS,
                                          rng)))
        if zero_head:
            self.head.params["weight"][:] = 0.0
            self.head.params["bias"][:] = 0.0

    @property
    def head(self) -> Dense:
        return self.layers[-1][1]

    def spec_string(self) -> str:
        """Layer chain, e.g. ``conv1d(96,32,5)|relu|maxpool(2)|...``."""
        return "|".join(layer.spec() for _, layer in self.layers)

    @classmethod
    def from_spec_string(cls, spec: str, window_len: int) -> "CnnModel":
        """Rebuild an (uninitialized) model from :meth:`spec_string`."""
        convs = [tuple(int(v) for v in m)
                 for m in re.findall(r"conv1d\((\d+),(\d+),(\d+)\)", spec)]
        denses = [tuple(int(v) for v in m)
                  for m in re.findall(r"dense\((\d+),(\d+)\)", spec)]
        pools = [int(m) for m in re.findall(r"maxpool\((\d+)\)", spec)]
        if not convs or len(denses) != 2:
            raise ShapeError(f"unrecognized layer spec {spec!r}")
        architecture = Architecture(
            conv_channels=tuple(c[1] for c in convs),
            kernels=tuple(c[2] for c in convs),
            hidden=denses[0][1],
            pool=pools[0] if pools else 2)
        model = cls(convs[0][0], window_len, architecture, seed=None)
        if model.spec_string() != spec:
            raise ShapeError(f"layer spec {spec!r} does not describe a "
                             f"supported architecture")
        return model

    def named_parameters(self) -> dict[str, np.ndarray]:
        """Parameters in layer order, keyed ``<layer>.<param>``."""
        return {
            f"{name}.{pname}": value
            for name, layer in self.layers
            for pname, value in layer.params.items()
        }

    def named_gradients(self) -> dict[str, np.ndarray]:
        return {
            f"{name}.{pname}": layer.grads[pname]
            for name, layer in self.layers for pname in layer.params
        }

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        own = self.named_parameters()
        if set(values) != set(own):
            raise ShapeError(f"parameter names differ: "
                             f"{sorted(set(values) ^ set(own))}")
        for name, layer in self.layers:
            for pname in layer.params:
                new = np.asarray(values[f"{name}.{pname}"], dtype=np.float64)
                if new.shape != layer.params[pname].shape:
                    raise ShapeError(f"{name}.{pname}: shape {new.shape}, "
                                     f"expected {layer.params[pname].shape}")
                layer.params[pname] = new.copy()
        self.zero_grad()

    def copy_parameters(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.named_parameters().items()}

    def zero_grad(self) -> None:
        for _, layer in self.layers:
            layer.zero_grad()

    def forward(self, batch: np.ndarray) -> np.ndarray:
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != self.in_channels or \
                x.shape[2] != self.window_len:
            raise ShapeError(f"model expects (B, {self.in_channels}, "
                             f"{self.window_len}), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("input")
        for name, layer in self.layers:
            x = layer.forward(x)
            if not np.all(np.isfinite(x)):
                raise NonFiniteError(name)
        return x

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        """Backpropagate ``dLoss/dOutput``; gradients accumulate into each
        layer's ``grads``."""
        grad = grad_output
        for name, layer in reversed(self.layers):
            grad = layer.backward(grad)
            if not np.all(np.isfinite(grad)):
                raise NonFiniteError(name, stage="backward")
        return grad

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        return self.forward(batch)


def mse_loss(prediction: np.ndarray,
             target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all ``B x 3`` outputs and its gradient."""
    if prediction.shape != target.shape:
        raise ShapeError(f"prediction {prediction.shape} vs target "
                         f"{target.shape}")
    diff = prediction - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def forward(model: CnnModel, batch: np.ndarray) -> np.ndarray:
    return model.forward(batch)


def backward(model: CnnModel,
             batch: np.ndarray,
             target: np.ndarray,
             loss_scale: float = 1.0) -> tuple[dict[str, np.ndarray], float]:
    r"""Gradients of ``loss_scale * MSE`` for every parameter.

    Returns:
        Fresh gradient arrays keyed like :meth:`CnnModel.named_parameters`
        and the (scaled) loss.
    """
    model.zero_grad()
    prediction = model.forward(batch)
    loss, grad = mse_loss(prediction, np.asarray(target, dtype=np.float64))
    model.backward(loss_scale * grad)
    grads = {k: v.copy() for k, v in model.named_gradients().items()}
    return grads, loss_scale * loss
