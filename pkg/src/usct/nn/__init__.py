"""Minimal differentiable tensor kernel (numpy, CPU, bit-reproducible).

Layers operate on (batch, channel, height, width) arrays, float32 by default
with a float64 mode for gradient checking. No general autodiff graph — just
the layer kinds the networks in this package are built from.
"""

from .functional import (
    check_finite,
    conv2d_forward,
    conv2d_backward,
    conv_transpose2d_forward,
    conv_transpose2d_backward,
    mse_loss,
    mse_loss_grad,
)
from .layers import (
    LAYER_KINDS,
    LEAKY_SLOPE,
    Conv2d,
    ConvTranspose2d,
    GlobalAvgPool,
    InstanceNorm,
    Layer,
    LayerSpec,
    LeakyReLU,
    Linear,
    Param,
    SEBlock,
    Sigmoid,
    Tanh,
    build_layer,
)
from .store import ParamStore, adam_step
from .gradcheck import grad_check, model_grad_check

__all__ = [
    "LAYER_KINDS", "LEAKY_SLOPE",
    "Conv2d", "ConvTranspose2d", "GlobalAvgPool", "InstanceNorm", "Layer",
    "LayerSpec", "LeakyReLU", "Linear", "Param", "SEBlock", "Sigmoid", "Tanh",
    "build_layer", "check_finite",
    "conv2d_forward", "conv2d_backward",
    "conv_transpose2d_forward", "conv_transpose2d_backward",
    "mse_loss", "mse_loss_grad",
    "ParamStore", "adam_step", "grad_check", "model_grad_check",
]
