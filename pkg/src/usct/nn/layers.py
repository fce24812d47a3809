"""Layer objects with explicit forward/backward passes.

Each layer owns its ``Param`` entries and caches whatever the backward pass
needs. Backward consumes the cache: calling it twice without a fresh forward
is a :class:`StateError`, so gradients can never silently accumulate across
steps. Parameter gradients are accumulated with ``+=`` — the surrounding
model (or grad-check driver) zeroes them before starting a backward sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, StateError
from . import functional as F

LEAKY_SLOPE = 0.2

LAYER_KINDS = (
    "conv", "conv_transpose", "leaky_relu", "instance_norm", "se_block",
    "linear", "sigmoid", "tanh", "global_avg_pool",
)


@dataclass
class Param:
    """A named trainable tensor with its gradient and Adam moments."""
    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self):
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)


class Layer:
    """Base class; subclasses implement _forward/_backward."""

    name: str = ""

    def __init__(self, name: str = ""):
        self.name = name
        self._cache = None

    def params(self) -> list[Param]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        y = self._forward(x)
        F.check_finite(y, f"{type(self).__name__}({self.name}) forward")
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError(
                f"backward before forward in {type(self).__name__}({self.name})")
        dx = self._backward(dy)
        self._cache = None
        F.check_finite(dx, f"{type(self).__name__}({self.name}) backward")
        return dx

    def _forward(self, x):
        raise NotImplementedError

    def _backward(self, dy):
        raise NotImplementedError


def _init_weight(rng: np.random.Generator, shape, fan_in: int, dtype):
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d(Layer):
    def __init__(self, name, in_ch, out_ch, kernel, stride=1, padding=0, *,
                 rng: np.random.Generator, dtype=np.float32, zero_init=False):
        super().__init__(name)
        kh, kw = F._pair(kernel)
        self.stride, self.padding = stride, padding
        fan_in = in_ch * kh * kw
        w = np.zeros((out_ch, in_ch, kh, kw), dtype=dtype) if zero_init else \
            _init_weight(rng, (out_ch, in_ch, kh, kw), fan_in, dtype)
        self.w = Param(f"{name}.w", w)
        self.b = Param(f"{name}.b", np.zeros(out_ch, dtype=dtype))

    def params(self):
        return [self.w, self.b]

    def _forward(self, x):
        self._cache = x
        return F.conv2d_forward(x, self.w.value, self.b.value,
                                self.stride, self.padding)

    def _backward(self, dy):
        x = self._cache
        dx, dw, db = F.conv2d_backward(x, self.w.value, dy,
                                       self.stride, self.padding)
        self.w.grad += dw
        self.b.grad += db
        return dx


class ConvTranspose2d(Layer):
    def __init__(self, name, in_ch, out_ch, kernel, stride=1, padding=0, *,
                 rng: np.random.Generator, dtype=np.float32, zero_init=False):
        super().__init__(name)
        kh, kw = F._pair(kernel)
        self.stride, self.padding = stride, padding
        fan_in = in_ch * kh * kw
        w = np.zeros((in_ch, out_ch, kh, kw), dtype=dtype) if zero_init else \
            _init_weight(rng, (in_ch, out_ch, kh, kw), fan_in, dtype)
        self.w = Param(f"{name}.w", w)
        self.b = Param(f"{name}.b", np.zeros(out_ch, dtype=dtype))

    def params(self):
        return [self.w, self.b]

    def _forward(self, x):
        self._cache = x
        return F.conv_transpose2d_forward(x, self.w.value, self.b.value,
                                          self.stride, self.padding)

    def _backward(self, dy):
        x = self._cache
        dx, dw, db = F.conv_transpose2d_backward(x, self.w.value, dy,
                                                 self.stride, self.padding)
        self.w.grad += dw
        self.b.grad += db
        return dx


class LeakyReLU(Layer):
    def __init__(self, name="", slope=LEAKY_SLOPE):
        super().__init__(name)
        self.slope = slope

    def _forward(self, x):
        self._cache = x
        return F.leaky_relu_forward(x, self.slope)

    def _backward(self, dy):
        return F.leaky_relu_backward(self._cache, dy, self.slope)


class Sigmoid(Layer):
    def _forward(self, x):
        y = F.sigmoid_forward(x)
        self._cache = y
        return y

    def _backward(self, dy):
        return F.sigmoid_backward(self._cache, dy)


class Tanh(Layer):
    def _forward(self, x):
        y = F.tanh_forward(x)
        self._cache = y
        return y

    def _backward(self, dy):
        return F.tanh_backward(self._cache, dy)


class InstanceNorm(Layer):
    """Per-sample, per-channel normalization with learnable scale/shift."""

    def __init__(self, name, channels, *, dtype=np.float32, eps=1e-5):
        super().__init__(name)
        self.eps = eps
        self.gamma = Param(f"{name}.gamma", np.ones(channels, dtype=dtype))
        self.beta = Param(f"{name}.beta", np.zeros(channels, dtype=dtype))

    def params(self):
        return [self.gamma, self.beta]

    def _forward(self, x):
        y, cache = F.instance_norm_forward(x, self.gamma.value,
                                           self.beta.value, self.eps)
        self._cache = cache
        return y

    def _backward(self, dy):
        dx, dg, db = F.instance_norm_backward(dy, self.gamma.value, self._cache)
        self.gamma.grad += dg
        self.beta.grad += db
        return dx


class GlobalAvgPool(Layer):
    def _forward(self, x):
        self._cache = x.shape
        return F.global_avg_pool_forward(x)

    def _backward(self, dy):
        return F.global_avg_pool_backward(self._cache, dy)


class Linear(Layer):
    """Channel-mixing layer, applied at every spatial position."""

    def __init__(self, name, in_ch, out_ch, *, rng, dtype=np.float32,
                 zero_init=False):
        super().__init__(name)
        w = np.zeros((out_ch, in_ch), dtype=dtype) if zero_init else \
            _init_weight(rng, (out_ch, in_ch), in_ch, dtype)
        self.w = Param(f"{name}.w", w)
        self.b = Param(f"{name}.b", np.zeros(out_ch, dtype=dtype))

    def params(self):
        return [self.w, self.b]

    def _forward(self, x):
        self._cache = x
        return F.linear_forward(x, self.w.value, self.b.value)

    def _backward(self, dy):
        dx, dw, db = F.linear_backward(self._cache, self.w.value, dy)
        self.w.grad += dw
        self.b.grad += db
        return dx


class SEBlock(Layer):
    """Channel gating: global-pool squeeze, two-layer excitation, sigmoid scale.

    The gate lies strictly in (0, 1) per channel, so the output is the input
    rescaled channel-wise.
    """

    def __init__(self, name, channels, reduction, *, rng, dtype=np.float32):
        super().__init__(name)
        if channels % reduction != 0:
            raise ConfigurationError(
                f"se_block reduction {reduction} does not divide {channels} channels")
        hidden = channels // reduction
        self.pool = GlobalAvgPool(f"{name}.pool")
        self.fc1 = Linear(f"{name}.fc1", channels, hidden, rng=rng, dtype=dtype)
        self.act = LeakyReLU(f"{name}.act")
        self.fc2 = Linear(f"{name}.fc2", hidden, channels, rng=rng, dtype=dtype)
        self.gate = Sigmoid(f"{name}.gate")

    def params(self):
        return self.fc1.params() + self.fc2.params()

    def _forward(self, x):
        g = self.gate.forward(self.fc2.forward(self.act.forward(
            self.fc1.forward(self.pool.forward(x)))))
        self._cache = (x, g)
        return x * g

    def _backward(self, dy):
        x, g = self._cache
        dg = (dy * x).sum(axis=(2, 3), keepdims=True)
        dx = dy * g
        dx += self.pool.backward(self.fc1.backward(self.act.backward(
            self.fc2.backward(self.gate.backward(dg)))))
        return dx


@dataclass(frozen=True)
class LayerSpec:
    """Declarative layer description, used for construction and grad checks."""
    kind: str
    in_channels: int = 1
    out_channels: int = 1
    kernel: int | tuple[int, int] = 3
    stride: int | tuple[int, int] = 1
    padding: int | tuple[int, int] = 0
    slope: float = LEAKY_SLOPE
    reduction: int = 2
    channels: int = 1

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        sh, sw = F._pair(self.stride)
        if sh < 1 or sw < 1:
            raise ConfigurationError("stride must be >= 1")
        if self.kind == "se_block" and self.channels % self.reduction != 0:
            raise ConfigurationError(
                f"se_block reduction {self.reduction} does not divide "
                f"{self.channels} channels")


def build_layer(spec: LayerSpec, name: str, *, rng=None,
                dtype=np.float32) -> Layer:
    rng = rng if rng is not None else np.random.default_rng(0)
    k = spec.kind
    if k == "conv":
        return Conv2d(name, spec.in_channels, spec.out_channels, spec.kernel,
                      spec.stride, spec.padding, rng=rng, dtype=dtype)
    if k == "conv_transpose":
        return ConvTranspose2d(name, spec.in_channels, spec.out_channels,
                               spec.kernel, spec.stride, spec.padding,
                               rng=rng, dtype=dtype)
    if k == "leaky_relu":
        return LeakyReLU(name, spec.slope)
    if k == "instance_norm":
        return InstanceNorm(name, spec.channels, dtype=dtype)
    if k == "se_block":
        return SEBlock(name, spec.channels, spec.reduction, rng=rng, dtype=dtype)
    if k == "linear":
        return Linear(name, spec.in_channels, spec.out_channels, rng=rng,
                      dtype=dtype)
    if k == "sigmoid":
        return Sigmoid(name)
    if k == "tanh":
        return Tanh(name)
    if k == "global_avg_pool":
        return GlobalAvgPool(name)
    raise ConfigurationError(f"unknown layer kind {k!r}")
