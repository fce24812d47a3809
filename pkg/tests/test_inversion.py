"""Source encoding and inversion network contracts."""

import numpy as np
import pytest

from usct.errors import ConfigurationError
from usct.geometry import AcquisitionConfig, ring_for_grid
from usct.inversion import (FwiTrainConfig, InversionNetSpec,
                            SourceEncodingSpec, build_fwi, build_inversionnet,
                            encode_sources, reconstruct, train_fwi)
from usct.nn import model_grad_check
from usct.phantoms import SosMap
from usct.wavesim import WaveformCube

RNG = np.random.default_rng(0)
RING = ring_for_grid(256, 1e-3)


def cube_vals(i=4, r=8, k=16, seed=0):
    return np.random.default_rng(seed).standard_normal((i, r, k))


class TestEncodeSources:
    def test_one_hot_selects_slice(self):
        x = cube_vals()
        w = np.zeros((2, 4))
        w[0, 3] = 1.0
        w[1, 1] = 1.0
        out = encode_sources(x, w)
        np.testing.assert_array_equal(out[0], x[3])
        np.testing.assert_array_equal(out[1], x[1])

    def test_linear_in_cube(self):
        x = cube_vals()
        w = RNG.standard_normal((3, 4))
        np.testing.assert_allclose(encode_sources(2.5 * x, w),
                                   2.5 * encode_sources(x, w), rtol=1e-12)
        y = cube_vals(seed=5)
        np.testing.assert_allclose(
            encode_sources(x + y, w),
            encode_sources(x, w) + encode_sources(y, w), atol=1e-12)

    def test_rademacher_mask_involution(self):
        x = cube_vals()
        w = np.eye(4)
        mask = np.array([1, -1, -1, 1], dtype=float)
        once = encode_sources(x, w, mask)
        twice = encode_sources(once, w, mask)
        np.testing.assert_array_equal(twice, x)

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            encode_sources(cube_vals(), RNG.standard_normal((2, 5)))

    def test_encoded_channel_bounds(self):
        with pytest.raises(ConfigurationError):
            SourceEncodingSpec(input_sources=4, encoded_channels=5)


class TestInversionNet:
    def _spec(self, se=False, hw=(8, 16), n=16):
        return InversionNetSpec(in_channels=2, input_hw=hw, map_n=n,
                                speed_range=(1400.0, 1600.0), base_channels=4,
                                channel_cap=16, se_enabled=se)

    def test_output_shape_and_range(self):
        _, net = build_inversionnet(self._spec(), seed=0,
                                    zero_init_output=False)
        x = RNG.standard_normal((3, 2, 8, 16)).astype(np.float32)
        y = net.forward(x)
        assert y.shape == (3, 1, 16, 16)
        assert (np.abs(y) <= 1.0).all()

    def test_non_power_of_two_map_rejected(self):
        with pytest.raises(ConfigurationError):
            self._spec(n=24)

    def test_se_adds_parameters_but_keeps_dims(self):
        s_plain, _ = build_inversionnet(self._spec(False), seed=0)
        s_se, net_se = build_inversionnet(self._spec(True), seed=0)
        assert s_se.param_count() > s_plain.param_count()
        x = RNG.standard_normal((1, 2, 8, 16)).astype(np.float32)
        assert net_se.forward(x).shape == (1, 1, 16, 16)

    @pytest.mark.parametrize("se", [False, True])
    def test_full_network_grad_check(self, se):
        enc = SourceEncodingSpec(4, 2)
        spec = InversionNetSpec(in_channels=2, input_hw=(8, 16), map_n=8,
                                speed_range=(1400.0, 1600.0), base_channels=4,
                                channel_cap=16, se_enabled=se)
        _, net = build_fwi(enc, spec, seed=3, dtype=np.float64,
                           zero_init_output=False)
        x = np.random.default_rng(3).standard_normal((2, 4, 8, 16))
        err = model_grad_check(net, x, trial_count=120, eps=1e-5, seed=4)
        assert err < 1e-4


def _toy_pairs(n_pairs=8, n=16, constant=None):
    acq = AcquisitionConfig(4, 8, RING, 16, 1e-7)
    pairs = []
    for i in range(n_pairs):
        r = np.random.default_rng(300 + i)
        vals = r.standard_normal((4, 8, 16))
        if constant is not None:
            sos = SosMap(values=np.full((n, n), float(constant)), dx=1e-3)
        else:
            sos = SosMap(values=r.uniform(1400, 1600, size=(n, n)), dx=1e-3)
        pairs.append((WaveformCube(values=vals, acquisition=acq), sos))
    return pairs


class TestTrainFwi:
    def test_constant_labels_converge(self):
        pairs = _toy_pairs(constant=1450.0)
        cfg = FwiTrainConfig(speed_range=(1400.0, 1600.0), epochs=100,
                             lr=3e-3, batch=4, seed=0, encoded_channels=2,
                             random_mask=False, base_channels=4,
                             channel_cap=16)
        model, hist = train_fwi(pairs, cfg)
        assert hist[-1] < 1e-4 * hist[0] + 1e-8

    def test_same_seed_identical_history(self):
        pairs = _toy_pairs()
        cfg = FwiTrainConfig(speed_range=(1400.0, 1600.0), epochs=4, lr=1e-3,
                             batch=4, seed=5, encoded_channels=2,
                             base_channels=4, channel_cap=16)
        _, h1 = train_fwi(pairs, cfg)
        _, h2 = train_fwi(pairs, cfg)
        assert h1 == h2

    def test_reconstruct_deterministic_and_in_range(self):
        pairs = _toy_pairs()
        cfg = FwiTrainConfig(speed_range=(1400.0, 1600.0), epochs=3, lr=1e-3,
                             batch=4, seed=1, encoded_channels=2,
                             base_channels=4, channel_cap=16)
        model, _ = train_fwi(pairs, cfg)
        a = reconstruct(model, pairs[0][0])
        b = reconstruct(model, pairs[0][0])
        np.testing.assert_array_equal(a.values, b.values)
        assert a.values.shape == (16, 16)
        assert a.values.min() >= 1400.0 and a.values.max() <= 1600.0

    def test_density_mismatch_warns(self):
        pairs = _toy_pairs()
        cfg = FwiTrainConfig(speed_range=(1400.0, 1600.0), epochs=2, lr=1e-3,
                             batch=4, seed=1, encoded_channels=2,
                             base_channels=4, channel_cap=16)
        model, _ = train_fwi(pairs, cfg)
        other = WaveformCube(
            values=np.zeros((8, 8, 16)),
            acquisition=AcquisitionConfig(8, 8, RING, 16, 1e-7))
        with pytest.warns(UserWarning, match="density"):
            # 8 sources vs the trained 4: encoder mixes what it can
            try:
                reconstruct(model, other)
            except ConfigurationError:
                pass
