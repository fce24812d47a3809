"""Experiment configuration: one JSON document drives a whole run.

The JSON holds desk-scale knobs (grid size, sampling, densities, training
budgets); everything derived (dx from points-per-wavelength, dt from the CFL
bound, ring radius from its fraction) is resolved here once so that every
stage sees identical concrete values. A single seed governs the run; stages
derive their own sub-seeds from it with fixed offsets.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .geometry import AcquisitionConfig, RingGeometry
from .inversion import FwiTrainConfig
from .phantoms import PhantomSpec
from .upscaler import UpscalerTrainConfig
from .wavesim import RickerSource, SimGrid, cfl_dt

# fixed sub-seed offsets so stages never share a stream
SEED_PHANTOMS = 0
SEED_UPSCALER = 1_000_003
SEED_FWI = 2_000_003


@dataclass
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "run"
    workers: int = 1
    holdout_fraction: float = 0.2

    # phantoms
    phantom_count: int = 40
    background_speed: float = 1500.0
    speed_range: tuple[float, float] = (1400.0, 1600.0)
    body_radius_fraction: float = 0.45
    inclusion_count_range: tuple[int, int] = (2, 6)
    inclusion_axis_range: tuple[float, float] = (0.10, 0.35)
    dense_fraction: float = 0.10
    dense_class_fraction: float = 0.5

    # grid / physics
    grid_n: int = 64
    points_per_wavelength: float = 24.0
    dx: float | None = None
    dt: float | None = None
    cfl_safety: float = 0.9
    time_steps: int = 224
    sponge_width: int = 16
    sponge_strength: float = 0.0015
    f_peak: float = 3.0e5
    wavelet_t0: float | None = None
    wavelet_amplitude: float = 1.0
    ring_radius_fraction: float = 0.30
    ring_radius: float | None = None

    # acquisition densities
    dense_sources: int = 8
    dense_receivers: int = 32
    sparse_sources: int = 8
    sparse_receivers: int = 8

    # training
    upscaler_epochs: int = 30
    upscaler_lr: float = 2e-3
    upscaler_batch_cubes: int = 4
    upscaler_base_channels: int = 8
    fwi_epochs: int = 120
    fwi_lr: float = 1e-3
    fwi_batch: int = 4
    fwi_encoded_channels: int = 4
    fwi_random_mask: bool = True
    fwi_se_enabled: bool = False
    fwi_se_reduction: int = 4
    fwi_base_channels: int = 8
    fwi_channel_cap: int = 64

    def __post_init__(self):
        self.speed_range = tuple(self.speed_range)
        self.inclusion_count_range = tuple(self.inclusion_count_range)
        self.inclusion_axis_range = tuple(self.inclusion_axis_range)
        if self.dx is None:
            lam_min = self.speed_range[0] / self.f_peak
            self.dx = lam_min / self.points_per_wavelength
        if self.dt is None:
            self.dt = self.cfl_safety * cfl_dt(self.dx, self.speed_range[1])
        if self.ring_radius is None:
            self.ring_radius = self.ring_radius_fraction * (self.grid_n - 1) * self.dx
        self.validate()

    # ------------------------------------------------------------------
    def validate(self) -> None:
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigurationError("holdout_fraction must be in [0, 1)")
        if self.phantom_count < 2:
            raise ConfigurationError("need at least 2 phantoms")
        ring = self.ring()          # margin checks
        spec = self.phantom_spec()  # range checks
        grid = self.sim_grid()      # CFL check
        # water annulus between body and ring
        if spec.body_radius > ring.radius - 2 * self.dx:
            raise ConfigurationError(
                f"body radius {spec.body_radius:.4g} leaves no water annulus "
                f"inside the ring radius {ring.radius:.4g}")
        self.acquisition("dense")
        self.acquisition("sparse")  # divisibility + capacity
        if grid.time_steps != self.time_steps:
            raise ConfigurationError("inconsistent time step counts")

    # ------------------------------------------------------------------
    def phantom_spec(self) -> PhantomSpec:
        return PhantomSpec(
            n=self.grid_n, dx=self.dx,
            background_speed=self.background_speed,
            speed_range=self.speed_range,
            body_radius_fraction=self.body_radius_fraction,
            inclusion_count_range=self.inclusion_count_range,
            inclusion_axis_range=self.inclusion_axis_range,
            dense_fraction=self.dense_fraction,
            dense_class_fraction=self.dense_class_fraction,
            seed=self.seed + SEED_PHANTOMS)

    def sim_grid(self) -> SimGrid:
        return SimGrid(n=self.grid_n, dx=self.dx, dt=self.dt,
                       time_steps=self.time_steps,
                       sponge_width=self.sponge_width,
                       sponge_strength=self.sponge_strength,
                       c_max=self.speed_range[1])

    def ring(self) -> RingGeometry:
        half = (self.grid_n - 1) / 2 * self.dx
        return RingGeometry(center=(half, half), radius=self.ring_radius,
                            grid_n=self.grid_n, dx=self.dx)

    def wavelet(self) -> RickerSource:
        return RickerSource(f_peak=self.f_peak, t0=self.wavelet_t0,
                            amplitude=self.wavelet_amplitude)

    def acquisition(self, kind: str) -> AcquisitionConfig:
        if kind == "dense":
            ns, nr = self.dense_sources, self.dense_receivers
        elif kind == "sparse":
            ns, nr = self.sparse_sources, self.sparse_receivers
        else:
            raise ConfigurationError(f"unknown acquisition kind {kind!r}")
        cfg = AcquisitionConfig(n_sources=ns, n_receivers=nr, ring=self.ring(),
                                time_steps=self.time_steps, sample_dt=self.dt)
        if kind == "sparse":
            if (self.dense_sources % ns != 0
                    or self.dense_receivers % nr != 0):
                raise ConfigurationError(
                    "sparse densities must divide the dense densities")
        return cfg

    @property
    def densities_equal(self) -> bool:
        return (self.sparse_sources == self.dense_sources
                and self.sparse_receivers == self.dense_receivers)

    def upscaler_cfg(self) -> UpscalerTrainConfig:
        return UpscalerTrainConfig(
            epochs=self.upscaler_epochs, lr=self.upscaler_lr,
            batch_cubes=self.upscaler_batch_cubes,
            base_channels=self.upscaler_base_channels,
            seed=self.seed + SEED_UPSCALER)

    def fwi_cfg(self) -> FwiTrainConfig:
        return FwiTrainConfig(
            speed_range=self.speed_range,
            epochs=self.fwi_epochs, lr=self.fwi_lr, batch=self.fwi_batch,
            seed=self.seed + SEED_FWI,
            encoded_channels=self.fwi_encoded_channels,
            random_mask=self.fwi_random_mask,
            se_enabled=self.fwi_se_enabled,
            se_reduction=self.fwi_se_reduction,
            base_channels=self.fwi_base_channels,
            channel_cap=self.fwi_channel_cap)

    def n_test(self) -> int:
        return max(1, int(self.phantom_count * self.holdout_fraction))

    # ------------------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(
                f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}: invalid JSON: {e}") from e
        if not isinstance(d, dict):
            raise ConfigurationError(f"{path}: config must be a JSON object")
        return cls.from_dict(d)
