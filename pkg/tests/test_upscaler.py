"""Zero-interleaving contract and upscaler training sanity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from usct.errors import ConfigurationError
from usct.geometry import AcquisitionConfig, ring_for_grid
from usct.nn import model_grad_check
from usct.upscaler import (UpscalerSpec, UpscalerTrainConfig, build_upscaler,
                           interleave_zeros, plan_upscaler, train_upscaler,
                           upscale)
from usct.wavesim import WaveformCube

RING = ring_for_grid(256, 1e-3)


def cfg(ns, nr, k=32):
    return AcquisitionConfig(ns, nr, RING, k, 1e-7)


def cube(ns, nr, k=32, seed=0):
    vals = np.random.default_rng(seed).standard_normal((ns, nr, k))
    return WaveformCube(values=vals, acquisition=cfg(ns, nr, k))


class TestInterleave:
    def test_identity_when_dims_match(self):
        c = cube(4, 8)
        out = interleave_zeros(c, cfg(4, 8))
        np.testing.assert_array_equal(out.values, c.values)
        assert out.mask.all()

    def test_two_to_four_receiver_columns(self):
        c = cube(2, 2, k=8)
        out = interleave_zeros(c, cfg(2, 4, 8))
        nz = np.nonzero(out.values.any(axis=(0, 2)))[0]
        np.testing.assert_array_equal(nz, [0, 2])

    def test_round_trip_bit_exact(self):
        c = cube(2, 4, k=16)
        out = interleave_zeros(c, cfg(4, 16, 16))
        si, ri = np.arange(0, 4, 2), np.arange(0, 16, 4)
        np.testing.assert_array_equal(out.values[np.ix_(si, ri)], c.values)
        assert out.mask.sum() == 2 * 4

    def test_unmasked_slots_exactly_zero(self):
        c = cube(2, 4, k=16)
        out = interleave_zeros(c, cfg(2, 16, 16))
        assert not out.values[:, ~out.mask.any(axis=0), :].any()

    def test_non_dividing_rejected(self):
        with pytest.raises(ConfigurationError):
            interleave_zeros(cube(2, 3), cfg(2, 8))

    def test_time_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            interleave_zeros(cube(2, 4, 32), cfg(2, 8, 16))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4),
           st.integers(0, 2 ** 31 - 1))
    def test_round_trip_property(self, ns, rmul, smul, seed):
        nr = ns * rmul  # keep sources <= receivers
        c = cube(ns, nr, k=4, seed=seed)
        target = cfg(ns * smul, nr * smul * 2, 4)
        out = interleave_zeros(c, target)
        si = np.arange(0, target.n_sources, smul)
        ri = np.arange(0, target.n_receivers, smul * 2)
        np.testing.assert_array_equal(out.values[np.ix_(si, ri)], c.values)


class TestUpscalerSpec:
    def test_fifteen_layers(self):
        spec = plan_upscaler(32, 64, 8)
        assert len(spec.layers) == 15

    def test_bad_layer_count_rejected(self):
        spec = plan_upscaler(8, 16, 4)
        with pytest.raises(ConfigurationError):
            UpscalerSpec(layers=spec.layers[:-1], base_channels=4,
                         target_receivers=8, time_steps=16)

    def test_odd_extents_handled_by_stride_1(self):
        spec = plan_upscaler(5, 12, 4)  # receiver axis cannot halve
        store, net = build_upscaler(spec, seed=0)
        x = np.zeros((2, 1, 5, 12), dtype=np.float32)
        assert net.forward(x).shape == x.shape

    def test_output_shape_matches_input(self):
        spec = plan_upscaler(32, 256, 8)
        _, net = build_upscaler(spec, seed=0)
        x = np.random.default_rng(0).standard_normal((3, 1, 32, 256)).astype(
            np.float32)
        assert net.forward(x).shape == x.shape

    def test_zero_initialized_output_layer(self):
        spec = plan_upscaler(8, 32, 4)
        _, net = build_upscaler(spec, seed=0)
        x = np.random.default_rng(1).standard_normal((2, 1, 8, 32)).astype(
            np.float32)
        assert not net.forward(x).any()


def test_network_grad_check_end_to_end():
    spec = plan_upscaler(8, 16, 4)
    _, net = build_upscaler(spec, seed=1, dtype=np.float64,
                            zero_init_output=False)
    x = np.random.default_rng(1).standard_normal((2, 1, 8, 16))
    err = model_grad_check(net, x, trial_count=120, eps=1e-5, seed=2)
    assert err < 1e-4


class TestTraining:
    def _toy_pairs(self, n_pairs=16):
        pairs = []
        for i in range(n_pairs):
            dense = cube(2, 8, k=16, seed=100 + i)
            sparse = WaveformCube(
                values=np.ascontiguousarray(dense.values[:, ::4, :]),
                acquisition=cfg(2, 2, 16))
            pairs.append((sparse, dense))
        return pairs

    def test_identity_pairs_drive_loss_down(self):
        # degenerate sparse == dense pairs on real simulated waveforms: the
        # network must learn a near-identity within the stated budget
        from usct.phantoms import PhantomSpec, generate_dataset
        from usct.wavesim import RickerSource, grid_for, simulate_acquisition

        c0, f = 1500.0, 3.0e5
        dx = (c0 / f) / 8
        n, k = 48, 64
        grid = grid_for(n=n, dx=dx, time_steps=k, c_max=1600.0,
                        sponge_width=12)
        acq = AcquisitionConfig(2, 8, ring_for_grid(n, dx), k, grid.dt)
        wav = RickerSource(f_peak=f)
        maps = generate_dataset(PhantomSpec(n=n, dx=dx), 16, seed=900)
        cubes = [simulate_acquisition(m, acq, grid, wav) for m in maps]
        pairs = [(WaveformCube(values=c.values.copy(), acquisition=acq), c)
                 for c in cubes]
        tc = UpscalerTrainConfig(epochs=50, lr=3e-3, batch_cubes=1,
                                 base_channels=8, seed=0)
        model, hist = train_upscaler(pairs, tc)
        assert hist[-1] < 1e-3 * hist[0]

    def test_epoch_loss_nearly_monotone(self):
        pairs = self._toy_pairs()
        tc = UpscalerTrainConfig(epochs=25, lr=1e-3, batch_cubes=4,
                                 base_channels=4, seed=0)
        _, hist = train_upscaler(pairs, tc)
        for a, b in zip(hist, hist[1:]):
            assert b <= 1.05 * a

    def test_same_seed_identical_history(self):
        pairs = self._toy_pairs()
        tc = UpscalerTrainConfig(epochs=5, lr=1e-3, batch_cubes=4,
                                 base_channels=4, seed=3)
        _, h1 = train_upscaler(pairs, tc)
        _, h2 = train_upscaler(pairs, tc)
        assert h1 == h2

    def test_upscale_shape_and_density_warning(self):
        pairs = self._toy_pairs()
        tc = UpscalerTrainConfig(epochs=2, lr=1e-3, batch_cubes=4,
                                 base_channels=4, seed=0)
        model, _ = train_upscaler(pairs, tc)
        out = upscale(model, pairs[0][0], cfg(2, 8, 16))
        assert out.values.shape == (2, 8, 16)
        with pytest.warns(UserWarning, match="density"):
            upscale(model, pairs[0][1], cfg(2, 8, 16))

    def test_source_axis_upscaling_shapes(self):
        pairs = []
        for i in range(6):
            dense = cube(4, 8, k=16, seed=200 + i)
            sparse = WaveformCube(
                values=np.ascontiguousarray(dense.values[::2, ::4, :]),
                acquisition=cfg(2, 2, 16))
            pairs.append((sparse, dense))
        tc = UpscalerTrainConfig(epochs=2, lr=1e-3, batch_cubes=3,
                                 base_channels=4, seed=0)
        model, _ = train_upscaler(pairs, tc)
        assert model.src_net is not None
        out = upscale(model, pairs[0][0], cfg(4, 8, 16))
        assert out.values.shape == (4, 8, 16)
