"""Finite-difference verification of analytic gradients.

The check builds the layer (or takes a whole model) in float64, runs one
analytic forward/backward against the scalar probe f = sum(y * v) for a fixed
random v, then compares a sampled set of coordinates against central
differences (f(th+eps) - f(th-eps)) / (2 eps). `trial_count` bounds how many
coordinates are sampled; small layers get every coordinate checked.
"""

from __future__ import annotations

import numpy as np

from .layers import Layer, LayerSpec, build_layer


def _default_input_shape(spec: LayerSpec) -> tuple[int, int, int, int]:
    k = spec.kind
    if k == "conv":
        return (2, spec.in_channels, 6, 6)
    if k == "conv_transpose":
        return (2, spec.in_channels, 4, 4)
    if k == "linear":
        return (2, spec.in_channels, 2, 2)
    if k in ("instance_norm", "se_block"):
        return (2, spec.channels, 4, 5)
    return (2, 3, 4, 4)


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-6)


def _coordinates(arrays, rng, trial_count):
    coords = [(ai, idx) for ai, arr in enumerate(arrays)
              for idx in range(arr.size)]
    if len(coords) <= trial_count:
        return coords
    pick = rng.choice(len(coords), size=trial_count, replace=False)
    return [coords[i] for i in np.sort(pick)]


def _check(forward, arrays, analytic, v, rng, trial_count, eps) -> float:
    worst = 0.0
    for ai, flat_idx in _coordinates(arrays, rng, trial_count):
        arr = arrays[ai]
        idx = np.unravel_index(flat_idx, arr.shape)
        orig = arr[idx]
        arr[idx] = orig + eps
        f_plus = float(np.sum(forward() * v))
        arr[idx] = orig - eps
        f_minus = float(np.sum(forward() * v))
        arr[idx] = orig
        fd = (f_plus - f_minus) / (2.0 * eps)
        worst = max(worst, _rel_err(float(analytic[ai][idx]), fd))
    return worst


def grad_check(spec: LayerSpec, trial_count: int = 400, eps: float = 1e-5,
               seed: int = 0, input_shape=None) -> float:
    """Worst relative error between analytic and FD gradients for one layer."""
    rng = np.random.default_rng(seed)
    layer = build_layer(spec, f"check.{spec.kind}", rng=rng, dtype=np.float64)
    shape = input_shape or _default_input_shape(spec)
    x = rng.standard_normal(shape)
    if spec.kind == "leaky_relu":
        # keep samples away from the kink so the FD stencil stays one-sided
        while np.any(np.abs(x) < 10 * eps):
            bad = np.abs(x) < 10 * eps
            x[bad] = rng.standard_normal(int(bad.sum()))
    for p in layer.params():
        p.grad[...] = 0
    y = layer.forward(x)
    v = rng.standard_normal(y.shape)
    dx = layer.backward(v.copy())

    arrays = [x] + [p.value for p in layer.params()]
    analytic = [dx] + [p.grad for p in layer.params()]
    return _check(lambda: layer.forward(x), arrays, analytic, v, rng,
                  trial_count, eps)


def model_grad_check(model, x: np.ndarray, trial_count: int = 150,
                     eps: float = 1e-5, seed: int = 0) -> float:
    """Worst relative FD error over a whole model (params and input).

    The model must expose forward(x) -> y, backward(dy) -> dx and params();
    it should be built in float64.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=np.float64)
    for p in model.params():
        p.grad[...] = 0
    y = model.forward(x)
    v = rng.standard_normal(y.shape)
    dx = model.backward(v.copy())

    arrays = [x] + [p.value for p in model.params()]
    analytic = [dx] + [p.grad for p in model.params()]
    return _check(lambda: model.forward(x), arrays, analytic, v, rng,
                  trial_count, eps)
