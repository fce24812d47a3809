"""2-D acoustic forward modeling on a speed-of-sound map.

Second-order leapfrog time stepping of

    u_tt = c(x)^2 * laplacian(u) + c(x)^2 * s(t) * delta(x - x_src)

on a node-centered square grid (interior cell (i, j) at (i*dx, j*dx)),
5-point Laplacian, point source/receivers snapped to the nearest node (the
spatial delta contributes a 1/dx^2 factor). An exponential sponge of
`sponge_width` cells surrounds the interior and damps both retained time
levels every step, emulating an unbounded medium. Stability requires the
2-D CFL bound dt <= dx / (c_max * sqrt(2)); constructing a grid that
violates it is an error.

Traces are sampled at the solver step: trace[k] is the receiver-node field
at t = k*dt, and the source term for the step k -> k+1 update is evaluated
at S(k*dt). Shots are independent, so a waveform cube is identical for any
worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError
from .geometry import AcquisitionConfig, transducer_positions
from .phantoms import SosMap

_FINITE_CHECK_STRIDE = 25


def cfl_dt(dx: float, c_max: float) -> float:
    """Largest stable time step for the 5-point stencil in 2-D."""
    if dx <= 0 or c_max <= 0:
        raise ConfigurationError("cfl_dt needs positive dx and c_max")
    return dx / (c_max * math.sqrt(2.0))


@dataclass(frozen=True)
class SimGrid:
    """Discretization: interior size, spacings, and sponge parameters."""
    n: int
    dx: float
    dt: float
    time_steps: int
    sponge_width: int = 20
    sponge_strength: float = 0.0015
    c_max: float = 1600.0

    def __post_init__(self):
        if self.n < 8 or self.dx <= 0 or self.dt <= 0 or self.time_steps < 1:
            raise ConfigurationError("bad grid dimensions")
        if self.sponge_width < 10:
            raise ConfigurationError("sponge_width must be >= 10 cells")
        limit = cfl_dt(self.dx, self.c_max)
        if self.dt > limit * (1 + 1e-12):
            raise ConfigurationError(
                f"dt {self.dt:.3e} violates the CFL bound {limit:.3e} "
                f"for c_max {self.c_max}")

    @property
    def full_n(self) -> int:
        return self.n + 2 * self.sponge_width


def grid_for(n: int, dx: float, time_steps: int, c_max: float = 1600.0,
             safety: float = 0.9, sponge_width: int = 20,
             sponge_strength: float = 0.0015) -> SimGrid:
    return SimGrid(n=n, dx=dx, dt=safety * cfl_dt(dx, c_max),
                   time_steps=time_steps, sponge_width=sponge_width,
                   sponge_strength=sponge_strength, c_max=c_max)


@dataclass(frozen=True)
class RickerSource:
    """Ricker wavelet: (1 - 2 (pi f tau)^2) exp(-(pi f tau)^2), tau = t - t0."""
    f_peak: float
    t0: float | None = None
    amplitude: float = 1.0

    def __post_init__(self):
        if self.f_peak <= 0:
            raise ConfigurationError("f_peak must be positive")
        if self.t0 is None:
            object.__setattr__(self, "t0", 1.5 / self.f_peak)
        if self.t0 < 1.5 / self.f_peak * (1 - 1e-12):
            raise ConfigurationError(
                f"t0 {self.t0:.3e} too small; wavelet must start near zero "
                f"(t0 >= {1.5 / self.f_peak:.3e})")


def ricker(t, src: RickerSource):
    tau = np.asarray(t, dtype=np.float64) - src.t0
    a = (np.pi * src.f_peak * tau) ** 2
    return src.amplitude * (1.0 - 2.0 * a) * np.exp(-a)


@dataclass(frozen=True)
class WaveformCube:
    """Recorded traces laid out sources x receivers x time."""
    values: np.ndarray
    acquisition: AcquisitionConfig

    def __post_init__(self):
        s, r, k = self.values.shape
        a = self.acquisition
        if (s, r, k) != (a.n_sources, a.n_receivers, a.time_steps):
            raise ConfigurationError(
                f"cube shape {self.values.shape} inconsistent with acquisition "
                f"({a.n_sources}, {a.n_receivers}, {a.time_steps})")


def _sponge_profile(grid: SimGrid) -> np.ndarray:
    nf, w = grid.full_n, grid.sponge_width
    idx = np.arange(nf)
    depth = np.maximum(0, np.maximum(w - idx, idx - (nf - 1 - w)))
    g = np.exp(-grid.sponge_strength * depth.astype(np.float64) ** 2)
    return g[:, None] * g[None, :]


def _snap(pos, grid: SimGrid) -> tuple[int, int]:
    i = round(float(pos[0]) / grid.dx)
    j = round(float(pos[1]) / grid.dx)
    if not (0 <= i < grid.n and 0 <= j < grid.n):
        raise ConfigurationError(f"position {tuple(pos)} outside grid interior")
    return i + grid.sponge_width, j + grid.sponge_width


def _pad_speed(sos: SosMap, grid: SimGrid) -> np.ndarray:
    if sos.n != grid.n:
        raise ConfigurationError(
            f"map size {sos.n} does not match grid interior {grid.n}")
    if abs(sos.dx - grid.dx) > 1e-15 * max(sos.dx, grid.dx):
        raise ConfigurationError("map dx does not match grid dx")
    c_actual = float(sos.values.max())
    if c_actual > grid.c_max * (1 + 1e-12):
        raise ConfigurationError(
            f"map speed {c_actual} exceeds the grid's CFL design speed "
            f"{grid.c_max}")
    return np.pad(sos.values.astype(np.float64), grid.sponge_width, mode="edge")


def simulate_shot(sos: SosMap, grid: SimGrid, src_pos, recv_positions,
                  wavelet: RickerSource | None, *, source_series=None,
                  return_energy: bool = False):
    """One source, all receivers. Returns traces (n_receivers, time_steps).

    `source_series` overrides the Ricker evaluation with an arbitrary
    amplitude-per-step array (the solver is linear in it). With
    return_energy=True also returns the per-step sum of u^2 over the full
    grid (used by the energy-decay checks).
    """
    c = _pad_speed(sos, grid)
    gain = _sponge_profile(grid)
    si, sj = _snap(src_pos, grid)
    rcells = tuple(np.array([_snap(p, grid) for p in recv_positions]).T)

    coef = (c * grid.dt / grid.dx) ** 2
    src_scale = grid.dt ** 2 * c[si, sj] ** 2 / grid.dx ** 2
    if source_series is None:
        src_series = ricker(np.arange(grid.time_steps) * grid.dt, wavelet)
    else:
        src_series = np.asarray(source_series, dtype=np.float64)
        if src_series.shape != (grid.time_steps,):
            raise ConfigurationError(
                f"source_series length {src_series.shape} != time_steps "
                f"{grid.time_steps}")

    nf = grid.full_n
    u = np.zeros((nf, nf))
    u_prev = np.zeros((nf, nf))
    lap = np.zeros((nf, nf))
    traces = np.zeros((len(recv_positions), grid.time_steps))
    energy = np.zeros(grid.time_steps) if return_energy else None

    for k in range(grid.time_steps):
        traces[:, k] = u[rcells]
        if return_energy:
            energy[k] = float(np.sum(u * u))
        lap[1:-1, 1:-1] = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:]
                           + u[1:-1, :-2] - 4.0 * u[1:-1, 1:-1])
        u_next = 2.0 * u - u_prev + coef * lap
        u_next[si, sj] += src_scale * src_series[k]
        u_next *= gain
        u *= gain
        u_prev, u = u, u_next
        if k % _FINITE_CHECK_STRIDE == 0 and not np.isfinite(u).all():
            raise NumericError(f"non-finite wavefield at step {k}")
    if not np.isfinite(u).all():
        raise NumericError(f"non-finite wavefield at step {grid.time_steps - 1}")
    return (traces, energy) if return_energy else traces


def _validate_acquisition(cfg: AcquisitionConfig, grid: SimGrid) -> None:
    if cfg.ring.grid_n != grid.n:
        raise ConfigurationError(
            f"ring grid_n {cfg.ring.grid_n} does not match grid interior {grid.n}")
    if abs(cfg.ring.dx - grid.dx) > 1e-15 * grid.dx:
        raise ConfigurationError("ring dx does not match grid dx")
    if cfg.time_steps != grid.time_steps:
        raise ConfigurationError(
            f"acquisition time_steps {cfg.time_steps} != grid {grid.time_steps}")
    if abs(cfg.sample_dt - grid.dt) > 1e-15 * grid.dt:
        raise ConfigurationError("acquisition sample_dt != solver dt")


def _shot_task(args):
    i, sos, grid, src_pos, recv_positions, wavelet = args
    return i, simulate_shot(sos, grid, src_pos, recv_positions, wavelet)


def simulate_acquisition(sos: SosMap, cfg: AcquisitionConfig, grid: SimGrid,
                         wavelet: RickerSource, workers: int = 1,
                         mute_self: bool = True) -> WaveformCube:
    """One shot per source; rows ordered by source index.

    A transducer cannot record while it transmits, so a receiver sharing the
    firing source's grid cell gets a zero trace (mute_self). The muting is a
    function of cell positions only, so sparse cubes still equal dense cubes
    restricted to the subsample indices, bit-exactly. Shots are independent,
    so the assembled cube is bit-identical for any `workers` value.
    """
    _validate_acquisition(cfg, grid)
    srcs = transducer_positions(cfg.n_sources, cfg.ring)
    recvs = transducer_positions(cfg.n_receivers, cfg.ring)
    values = np.zeros((cfg.n_sources, cfg.n_receivers, cfg.time_steps))
    if workers <= 1:
        for i in range(cfg.n_sources):
            values[i] = simulate_shot(sos, grid, srcs[i], recvs, wavelet)
    else:
        tasks = [(i, sos, grid, srcs[i], recvs, wavelet)
                 for i in range(cfg.n_sources)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, traces in pool.map(_shot_task, tasks):
                values[i] = traces
    if mute_self:
        src_cells = [_snap(p, grid) for p in srcs]
        recv_cells = [_snap(p, grid) for p in recvs]
        for i, sc in enumerate(src_cells):
            for j, rc in enumerate(recv_cells):
                if rc == sc:
                    values[i, j, :] = 0.0
    return WaveformCube(values=values, acquisition=cfg)
