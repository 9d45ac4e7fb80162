"""Layers and the fixed two-conv/two-FC network.

Everything is plain numpy: convolution lowers to im2col plus a batched GEMM,
which is the fast path on CPU for these shapes in either kernel backend.
Layers cache what their backward pass needs; gradients accumulate nowhere,
each backward() overwrites.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .. import _kernels
from ..rng import Rng

__all__ = ["ShapeMismatch", "NetworkSpec", "Conv2d", "Linear", "ReLU", "Sigmoid", "Flatten", "Network", "build_network"]


class ShapeMismatch(Exception):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture: two valid 5x5 convolutions, two FC layers, sigmoid outputs.

    `out_width` is the orientation-grid size for the proposal scorer and 1
    for the grasp classifier.
    """

    in_channels: int
    out_width: int
    in_size: int = 60
    conv_channels: tuple[int, int] = (16, 32)
    kernel_size: int = 5
    fc_width: int = 256

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        if min(self.in_channels, self.out_width, self.in_size, self.fc_width) < 1:
            raise ValueError("spec dimensions must be positive")
        if self.feature_sizes()[-1] < 1:
            raise ValueError("input too small for two valid convolutions")

    def feature_sizes(self) -> tuple[int, int, int]:
        """Spatial sizes (input, after conv1, after conv2)."""
        s1 = self.in_size - self.kernel_size + 1
        s2 = s1 - self.kernel_size + 1
        return self.in_size, s1, s2

    def flat_features(self) -> int:
        return self.conv_channels[1] * self.feature_sizes()[2] ** 2

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "out_width": self.out_width,
            "in_size": self.in_size,
            "conv_channels": list(self.conv_channels),
            "kernel_size": self.kernel_size,
            "fc_width": self.fc_width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            in_channels=int(d["in_channels"]),
            out_width=int(d["out_width"]),
            in_size=int(d["in_size"]),
            conv_channels=tuple(d["conv_channels"]),
            kernel_size=int(d["kernel_size"]),
            fc_width=int(d["fc_width"]),
        )


# Per-block budget for the lowered patch matrix. Small enough to live in
# cache, which matters more than GEMM size on this memory-bound target.
_COLS_BLOCK_BYTES = 16 * 1024 * 1024


class Conv2d:
    """Valid (no padding) stride-1 convolution.

    Lowered to im2col + GEMM, blocked over batch samples so the patch matrix
    stays cache-resident. Set `skip_input_grad` when the layer sits first in
    a network: backward then returns None instead of the unused input grad.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, name: str):
        self.name = name
        self.k = kernel_size
        self.skip_input_grad = False
        self.weight = np.zeros((out_channels, in_channels, kernel_size, kernel_size))
        self.bias = np.zeros(out_channels)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._xt_blocks = None
        self._x_shape = None

    def _block(self, patch_rows: int, per_sample: int, itemsize: int) -> int:
        return max(1, _COLS_BLOCK_BYTES // (patch_rows * per_sample * itemsize))

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.weight.shape[1]:
            raise ShapeMismatch(
                f"{self.name}: expected (B, {self.weight.shape[1]}, H, W), got {x.shape}"
            )
        if x.shape[2] < self.k or x.shape[3] < self.k:
            raise ShapeMismatch(f"{self.name}: input smaller than the kernel")
        b, c = x.shape[0], x.shape[1]
        k = self.k
        oh, ow = x.shape[2] - k + 1, x.shape[3] - k + 1
        p = oh * ow
        rows = c * k * k
        cout = self.weight.shape[0]
        w2 = self.weight.reshape(cout, -1)
        out = np.empty((b * p, cout), dtype=x.dtype)
        block = self._block(rows, p, x.itemsize)
        blocks = []
        for b0 in range(0, b, block):
            nb = min(block, b - b0)
            xt = np.ascontiguousarray(x[b0:b0 + nb].transpose(1, 0, 2, 3))
            blocks.append(xt)
            cols = np.empty((rows, nb * p), dtype=x.dtype)
            _kernels.im2col(xt, k, cols)
            out[b0 * p:(b0 + nb) * p] = cols.T @ w2.T
        out += self.bias[None, :]
        self._xt_blocks = blocks
        self._x_shape = x.shape
        return np.ascontiguousarray(out.reshape(b, oh, ow, cout).transpose(0, 3, 1, 2))

    def backward(self, gy: np.ndarray) -> np.ndarray | None:
        b, cout = gy.shape[0], gy.shape[1]
        c = self._x_shape[1]
        k = self.k
        h, w = self._x_shape[2], self._x_shape[3]
        p = gy.shape[2] * gy.shape[3]
        rows = c * k * k
        w2 = self.weight.reshape(cout, -1)
        gw = np.zeros((rows, cout), dtype=gy.dtype)
        gb = np.zeros(cout, dtype=gy.dtype)
        gx = None
        if not self.skip_input_grad:
            gx = np.empty(self._x_shape, dtype=gy.dtype)
        b0 = 0
        for xt in self._xt_blocks:
            nb = xt.shape[1]
            cols = np.empty((rows, nb * p), dtype=gy.dtype)
            _kernels.im2col(xt, k, cols)
            g2 = np.ascontiguousarray(gy[b0:b0 + nb].transpose(1, 0, 2, 3)).reshape(cout, -1)
            gw += cols @ g2.T
            gb += g2.sum(axis=1)
            if gx is not None:
                gxt = np.zeros((c, nb, h, w), dtype=gy.dtype)
                _kernels.col2im(np.ascontiguousarray(w2.T @ g2), k, gxt)
                gx[b0:b0 + nb] = gxt.transpose(1, 0, 2, 3)
            b0 += nb
        self.grad_weight = np.ascontiguousarray(gw.T).reshape(self.weight.shape)
        self.grad_bias = gb
        return gx

    def parameters(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def gradients(self):
        return [self.grad_weight, self.grad_bias]

    def set_parameters(self, arrays):
        self.weight, self.bias = arrays[0], arrays[1]
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)


class Linear:
    def __init__(self, in_features: int, out_features: int, name: str):
        self.name = name
        self.weight = np.zeros((out_features, in_features))
        self.bias = np.zeros(out_features)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weight.shape[1]:
            raise ShapeMismatch(
                f"{self.name}: expected (B, {self.weight.shape[1]}), got {x.shape}"
            )
        self._x = x
        return x @ self.weight.T + self.bias

    def backward(self, gy: np.ndarray) -> np.ndarray:
        self.grad_weight = gy.T @ self._x
        self.grad_bias = gy.sum(axis=0)
        return gy @ self.weight

    def parameters(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def gradients(self):
        return [self.grad_weight, self.grad_bias]

    def set_parameters(self, arrays):
        self.weight, self.bias = arrays[0], arrays[1]
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.maximum(x, 0.0, dtype=x.dtype)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        return gy * self._mask

    def parameters(self):
        return []

    def gradients(self):
        return []


class Sigmoid:
    def __init__(self):
        self._y = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = expit(x)
        return self._y

    def backward(self, gy: np.ndarray) -> np.ndarray:
        return gy * self._y * (1.0 - self._y)

    def parameters(self):
        return []

    def gradients(self):
        return []


class Flatten:
    def __init__(self):
        self._shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        return gy.reshape(self._shape)

    def parameters(self):
        return []

    def gradients(self):
        return []


class Network:
    """The fixed layer chain; usable for both the scorer and the classifier."""

    def __init__(self, spec: NetworkSpec, layers: list):
        self.spec = spec
        self.layers = layers

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1:] != (self.spec.in_channels, self.spec.in_size, self.spec.in_size):
            raise ShapeMismatch(
                f"expected (B, {self.spec.in_channels}, {self.spec.in_size}, "
                f"{self.spec.in_size}), got {x.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, gy: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            gy = layer.backward(gy)
        return gy

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def gradients(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.gradients())
        return out

    def feature_shapes(self) -> list[tuple[int, ...]]:
        """Per-stage output shapes for one input image (reported by tests)."""
        s0, s1, s2 = self.spec.feature_sizes()
        c1, c2 = self.spec.conv_channels
        return [
            (self.spec.in_channels, s0, s0),
            (c1, s1, s1),
            (c2, s2, s2),
            (self.spec.fc_width,),
            (self.spec.out_width,),
        ]

    def astype(self, dtype) -> "Network":
        """Cast all parameters in place; returns self."""
        for layer in self.layers:
            if hasattr(layer, "set_parameters"):
                layer.set_parameters([p.astype(dtype) for _, p in layer.parameters()])
        return self


def build_network(spec: NetworkSpec, rng: Rng | None = None, dtype=np.float64) -> Network:
    """Network with uniform +-sqrt(6 / fan_in) weight init and zero biases."""
    c1, c2 = spec.conv_channels
    k = spec.kernel_size
    layers = [
        Conv2d(spec.in_channels, c1, k, "conv1"),
        ReLU(),
        Conv2d(c1, c2, k, "conv2"),
        ReLU(),
        Flatten(),
        Linear(spec.flat_features(), spec.fc_width, "fc1"),
        ReLU(),
        Linear(spec.fc_width, spec.out_width, "fc2"),
        Sigmoid(),
    ]
    net = Network(spec, layers)
    layers[0].skip_input_grad = True
    if rng is not None:
        for layer in net.layers:
            if isinstance(layer, Conv2d):
                fan_in = layer.weight.shape[1] * layer.k * layer.k
            elif isinstance(layer, Linear):
                fan_in = layer.weight.shape[1]
            else:
                continue
            bound = np.sqrt(6.0 / fan_in)
            layer.weight = rng.uniform(-bound, bound, layer.weight.shape)
    net.astype(dtype)
    return net
