"""Finite-difference gradient oracle for every layer kind."""

import numpy as np
import pytest

from usct.nn import LayerSpec, grad_check

TOL = 1e-5

CASES = [
    LayerSpec(kind="conv", in_channels=2, out_channels=3, kernel=3,
              stride=1, padding=1),
    LayerSpec(kind="conv", in_channels=2, out_channels=3, kernel=4,
              stride=2, padding=1),
    LayerSpec(kind="conv_transpose", in_channels=3, out_channels=2, kernel=3,
              stride=1, padding=1),
    LayerSpec(kind="conv_transpose", in_channels=3, out_channels=2, kernel=4,
              stride=2, padding=1),
    LayerSpec(kind="instance_norm", channels=3),
    LayerSpec(kind="se_block", channels=4, reduction=2),
    LayerSpec(kind="linear", in_channels=3, out_channels=2),
    LayerSpec(kind="sigmoid"),
    LayerSpec(kind="tanh"),
    LayerSpec(kind="global_avg_pool"),
]


@pytest.mark.parametrize("spec", CASES, ids=lambda s: f"{s.kind}-k{s.kernel}")
def test_layer_gradients(spec):
    err = grad_check(spec, trial_count=250, eps=1e-5, seed=7)
    assert err < TOL, f"{spec.kind}: max relative error {err:.3e}"


def test_leaky_relu_away_from_kink():
    # piecewise linear, so only FD roundoff remains; a wide eps removes it
    err = grad_check(LayerSpec(kind="leaky_relu"), trial_count=250,
                     eps=1e-3, seed=7)
    assert err < 1e-8, f"leaky_relu: max relative error {err:.3e}"


def test_errors_are_seed_stable():
    spec = LayerSpec(kind="conv", in_channels=1, out_channels=2, kernel=3,
                     stride=1, padding=1)
    a = grad_check(spec, trial_count=50, eps=1e-5, seed=3)
    b = grad_check(spec, trial_count=50, eps=1e-5, seed=3)
    assert a == b
