"""Transducer ring geometry, sparsity and hardware-cost accounting.

Positions live in the simulation's node-centered frame: interior cell (i, j)
sits at physical point (i*dx, j*dx). Sparse configurations occupy a strided
subset of the dense ring positions, so sparse coordinates equal the dense
ones bit-for-bit (angles are computed as 2*pi*(index/count), and index/count
yields the identical quotient for aligned indices).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class RingGeometry:
    """Circular transducer array inside a square simulation grid."""
    center: tuple[float, float]
    radius: float
    grid_n: int
    dx: float

    def __post_init__(self):
        if self.radius <= 0 or self.dx <= 0 or self.grid_n < 8:
            raise ConfigurationError("ring needs positive radius/dx, grid_n >= 8")
        lo, hi = 2 * self.dx, (self.grid_n - 3) * self.dx
        for c in self.center:
            if c - self.radius < lo or c + self.radius > hi:
                raise ConfigurationError(
                    f"ring (center {self.center}, radius {self.radius}) leaves "
                    f"less than 2 cells of interior margin on a {self.grid_n} grid")

    @property
    def capacity(self) -> int:
        """Distinct positions supportable at ~1 cell spacing."""
        return int(np.floor(2 * np.pi * self.radius / self.dx))


def ring_for_grid(grid_n: int, dx: float, radius_fraction: float = 0.42) -> RingGeometry:
    half = (grid_n - 1) / 2 * dx
    return RingGeometry(center=(half, half),
                        radius=radius_fraction * (grid_n - 1) * dx,
                        grid_n=grid_n, dx=dx)


@dataclass(frozen=True)
class AcquisitionConfig:
    """How many sources/receivers sample the ring, and the trace clock."""
    n_sources: int
    n_receivers: int
    ring: RingGeometry
    time_steps: int
    sample_dt: float

    def __post_init__(self):
        if self.n_sources < 1:
            raise ConfigurationError("n_sources must be >= 1")
        if self.n_sources > self.n_receivers:
            raise ConfigurationError(
                f"n_sources ({self.n_sources}) exceeds n_receivers "
                f"({self.n_receivers})")
        if self.n_receivers > self.ring.capacity:
            raise ConfigurationError(
                f"{self.n_receivers} receivers exceed ring capacity "
                f"{self.ring.capacity}")
        if self.time_steps < 1 or self.sample_dt <= 0:
            raise ConfigurationError("need time_steps >= 1 and sample_dt > 0")


def transducer_positions(count: int, ring: RingGeometry) -> np.ndarray:
    """`count` points uniformly spaced on the ring, first at angle 0, CCW.

    Returns an array of shape (count, 2).
    """
    if count < 1:
        raise ConfigurationError("position count must be >= 1")
    angles = 2.0 * np.pi * (np.arange(count) / count)
    pos = np.empty((count, 2))
    pos[:, 0] = ring.center[0] + ring.radius * np.cos(angles)
    pos[:, 1] = ring.center[1] + ring.radius * np.sin(angles)
    return pos


def element_count(cfg: AcquisitionConfig) -> int:
    """Hardware cost proxy: total transducer elements."""
    return cfg.n_sources + cfg.n_receivers


def sparsity_vs(sparse: AcquisitionConfig, dense: AcquisitionConfig) -> float:
    """Fraction of the dense source x receiver product that is missing."""
    subsample_indices(dense.n_sources, sparse.n_sources)
    subsample_indices(dense.n_receivers, sparse.n_receivers)
    ratio = (sparse.n_sources * sparse.n_receivers) / \
        (dense.n_sources * dense.n_receivers)
    return 1.0 - ratio


def subsample_indices(dense_count: int, sparse_count: int) -> np.ndarray:
    """Stride-k selection of sparse slots within the dense layout."""
    if sparse_count < 1 or dense_count < sparse_count:
        raise ConfigurationError(
            f"need 1 <= sparse ({sparse_count}) <= dense ({dense_count})")
    if dense_count % sparse_count != 0:
        raise ConfigurationError(
            f"sparse count {sparse_count} does not divide dense count "
            f"{dense_count}")
    k = dense_count // sparse_count
    return np.arange(0, dense_count, k)
