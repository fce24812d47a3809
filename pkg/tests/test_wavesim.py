"""Forward-modeling unit checks. The heavyweight physics oracles
(travel time, convergence, reciprocity, restriction) live in
test_acceptance.py; these are the small fast contracts."""

import numpy as np
import pytest

from usct.errors import ConfigurationError, NumericError
from usct.geometry import AcquisitionConfig, ring_for_grid
from usct.phantoms import PhantomSpec, SosMap, generate_phantom
from usct.wavesim import (RickerSource, SimGrid, WaveformCube, cfl_dt,
                          grid_for, ricker, simulate_acquisition,
                          simulate_shot)

C0, F = 1500.0, 3.0e5
DX = (C0 / F) / 8


def small_grid(n=48, k=160, **kw):
    return grid_for(n=n, dx=DX, time_steps=k, c_max=1600.0, sponge_width=12,
                    **kw)


def water(n=48):
    return SosMap(values=np.full((n, n), C0), dx=DX)


class TestRicker:
    def test_peak_at_t0(self):
        src = RickerSource(f_peak=F)
        assert ricker(src.t0, src) == pytest.approx(1.0)

    def test_analytic_zero(self):
        src = RickerSource(f_peak=F, amplitude=2.5)
        t_zero = src.t0 + 1.0 / (np.sqrt(2.0) * np.pi * F)
        assert ricker(t_zero, src) == pytest.approx(0.0, abs=1e-12)

    def test_even_around_t0(self):
        src = RickerSource(f_peak=F)
        for delta in (1e-7, 3e-7, 8e-7):
            assert ricker(src.t0 + delta, src) == pytest.approx(
                ricker(src.t0 - delta, src), rel=1e-12)

    def test_t0_floor_enforced(self):
        with pytest.raises(ConfigurationError):
            RickerSource(f_peak=F, t0=0.5 / F)


class TestCfl:
    def test_formula_value(self):
        assert cfl_dt(1.5e-4, 1600.0) == pytest.approx(6.629e-8, rel=1e-3)

    def test_linear_in_dx(self):
        assert cfl_dt(2 * DX, 1600.0) == pytest.approx(2 * cfl_dt(DX, 1600.0))

    def test_monotone_in_speed(self):
        speeds = [1000.0, 2000.0, 4000.0, 8000.0]
        vals = [cfl_dt(DX, c) for c in speeds]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_violation_rejected_at_construction(self):
        limit = cfl_dt(DX, 1600.0)
        with pytest.raises(ConfigurationError):
            SimGrid(n=48, dx=DX, dt=1.01 * limit, time_steps=10,
                    sponge_width=12, c_max=1600.0)

    def test_thin_sponge_rejected(self):
        with pytest.raises(ConfigurationError):
            grid_for(n=48, dx=DX, time_steps=10, sponge_width=8)


class TestSimulateShot:
    def test_zero_amplitude_gives_zero_traces(self):
        grid = small_grid()
        tr = simulate_shot(water(), grid, np.array([24 * DX, 24 * DX]),
                           [np.array([30 * DX, 24 * DX])],
                           RickerSource(f_peak=F, amplitude=0.0))
        assert not tr.any()

    def test_amplitude_doubling_is_exact(self):
        grid = small_grid()
        src = np.array([24 * DX, 24 * DX])
        rec = [np.array([34 * DX, 24 * DX])]
        t1 = simulate_shot(water(), grid, src, rec, RickerSource(f_peak=F))
        t2 = simulate_shot(water(), grid, src, rec,
                           RickerSource(f_peak=F, amplitude=2.0))
        np.testing.assert_array_equal(t2, 2.0 * t1)

    def test_map_speed_above_design_rejected(self):
        grid = small_grid()
        hot = SosMap(values=np.full((48, 48), 1700.0), dx=DX)
        with pytest.raises(ConfigurationError):
            simulate_shot(hot, grid, np.array([24 * DX, 24 * DX]),
                          [np.array([30 * DX, 24 * DX])],
                          RickerSource(f_peak=F))

    def test_position_outside_interior_rejected(self):
        grid = small_grid()
        with pytest.raises(ConfigurationError):
            simulate_shot(water(), grid, np.array([100 * DX, 24 * DX]),
                          [np.array([30 * DX, 24 * DX])],
                          RickerSource(f_peak=F))

    def test_nan_detected_with_step_index(self):
        grid = small_grid()
        sick = water()
        sick.values[10, 10] = np.nan
        with pytest.raises(NumericError, match="step"):
            simulate_shot(sick, grid, np.array([24 * DX, 24 * DX]),
                          [np.array([30 * DX, 24 * DX])],
                          RickerSource(f_peak=F))

    def test_stability_on_random_phantom(self):
        n, k = 48, 400
        grid = small_grid(n, k)
        sos = generate_phantom(PhantomSpec(n=n, dx=DX), 5)
        tr = simulate_shot(sos, grid, np.array([24 * DX, 24 * DX]),
                           [np.array([34 * DX, 24 * DX])],
                           RickerSource(f_peak=F))
        assert np.isfinite(tr).all()
        # no exponential blow-up: the tail stays below the recorded peak
        peak = np.abs(tr).max()
        assert np.abs(tr[:, -k // 10:]).max() <= peak

    def test_energy_decay_after_source_off(self):
        n, k = 48, 420
        grid = small_grid(n, k)
        sos = generate_phantom(PhantomSpec(n=n, dx=DX), 8)
        wav = RickerSource(f_peak=F)
        _, en = simulate_shot(sos, grid, np.array([24 * DX, 24 * DX]),
                              [np.array([30 * DX, 24 * DX])], wav,
                              return_energy=True)
        k_off = int(np.ceil((wav.t0 + 3.0 / F) / grid.dt)) + 1
        floor = 1e-3 * en.max()  # below -60 dB only sponge noise remains
        for i in range(k_off, k - 100):
            if en[i] >= floor:
                assert en[i + 100] <= 1.01 * en[i]


class TestSimulateAcquisition:
    def test_cube_dims(self):
        n, k = 48, 96
        grid = small_grid(n, k)
        ring = ring_for_grid(n, DX)
        cfg = AcquisitionConfig(4, 8, ring, k, grid.dt)
        cube = simulate_acquisition(water(n), cfg, grid,
                                    RickerSource(f_peak=F))
        assert cube.values.shape == (4, 8, k)

    def test_self_trace_muted(self):
        n, k = 48, 96
        grid = small_grid(n, k)
        ring = ring_for_grid(n, DX)
        cfg = AcquisitionConfig(4, 8, ring, k, grid.dt)
        cube = simulate_acquisition(water(n), cfg, grid,
                                    RickerSource(f_peak=F))
        # sources sit on receiver slots 0, 2, 4, 6 of the 8-ring
        for i in range(4):
            assert not cube.values[i, 2 * i].any()
            assert cube.values[i, (2 * i + 4) % 8].any()

    def test_cube_shape_mismatch_rejected(self):
        n, k = 48, 96
        grid = small_grid(n, k)
        ring = ring_for_grid(n, DX)
        cfg = AcquisitionConfig(4, 8, ring, k, grid.dt)
        with pytest.raises(ConfigurationError):
            WaveformCube(values=np.zeros((4, 8, k + 1)), acquisition=cfg)

    def test_time_step_mismatch_rejected(self):
        n, k = 48, 96
        grid = small_grid(n, k)
        ring = ring_for_grid(n, DX)
        cfg = AcquisitionConfig(4, 8, ring, k + 1, grid.dt)
        with pytest.raises(ConfigurationError):
            simulate_acquisition(water(n), cfg, grid, RickerSource(f_peak=F))
