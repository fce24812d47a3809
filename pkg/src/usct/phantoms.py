"""Synthetic speed-of-sound phantoms.

A phantom is water everywhere except a central "body" disk holding a slow
fatty base speed plus randomly placed elliptical inclusions of faster tissue.
The tissue fraction inside the body separates the easy ("fatty") class from
the hard ("dense") class. Everything is deterministic in (spec, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import ConfigurationError

FATTY_CLASS = "fatty"
DENSE_CLASS = "dense"

_MAX_EXTRA_INCLUSIONS = 256


@dataclass(frozen=True)
class SosMap:
    """n x n grid of speed-of-sound values (m/s) with cell size dx (m)."""
    values: np.ndarray
    dx: float

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PhantomSpec:
    n: int
    dx: float
    background_speed: float = 1500.0
    speed_range: tuple[float, float] = (1400.0, 1600.0)
    body_radius_fraction: float = 0.6
    inclusion_count_range: tuple[int, int] = (2, 6)
    inclusion_axis_range: tuple[float, float] = (0.10, 0.35)
    dense_fraction: float = 0.10
    dense_class_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        c_min, c_max = self.speed_range
        if c_min > c_max:
            raise ConfigurationError(f"degenerate speed range {self.speed_range}")
        if not c_min <= self.background_speed <= c_max:
            raise ConfigurationError(
                f"background speed {self.background_speed} outside "
                f"{self.speed_range}")
        if not 0 < self.body_radius_fraction < 1:
            raise ConfigurationError("body_radius_fraction must be in (0,1)")
        lo, hi = self.inclusion_count_range
        if lo < 0 or hi < lo:
            raise ConfigurationError(
                f"bad inclusion_count_range {self.inclusion_count_range}")
        alo, ahi = self.inclusion_axis_range
        if not 0 < alo <= ahi < 1:
            raise ConfigurationError(
                f"bad inclusion_axis_range {self.inclusion_axis_range}")
        if self.n < 8 or self.dx <= 0:
            raise ConfigurationError("need n >= 8 and dx > 0")

    @property
    def body_radius(self) -> float:
        return self.body_radius_fraction * (self.n - 1) / 2 * self.dx


def _grid_xy(n: int, dx: float):
    coords = np.arange(n) * dx
    return np.meshgrid(coords, coords, indexing="ij")


def body_mask(spec: PhantomSpec) -> np.ndarray:
    gx, gy = _grid_xy(spec.n, spec.dx)
    half = (spec.n - 1) / 2 * spec.dx
    return (gx - half) ** 2 + (gy - half) ** 2 <= spec.body_radius ** 2


def tissue_fraction(sos: SosMap, spec: PhantomSpec) -> float:
    """Fraction of body cells at or above the midpoint speed."""
    c_min, c_max = spec.speed_range
    mask = body_mask(spec)
    threshold = 0.5 * (c_min + c_max)
    return float(np.mean(sos.values[mask] >= threshold))


def _add_ellipse(vals, gx, gy, spec: PhantomSpec, rng) -> None:
    c_min, c_max = spec.speed_range
    span = c_max - c_min
    half = (spec.n - 1) / 2 * spec.dx
    br = spec.body_radius
    rho = 0.85 * br * np.sqrt(rng.uniform())
    phi = rng.uniform(0, 2 * np.pi)
    cx = half + rho * np.cos(phi)
    cy = half + rho * np.sin(phi)
    cap = br - rho  # keeps the ellipse fully inside the body disk
    alo, ahi = spec.inclusion_axis_range
    a = min(br * rng.uniform(alo, ahi), cap)
    b = min(br * rng.uniform(alo, ahi), cap)
    theta = rng.uniform(0, np.pi)
    speed = c_min + span * rng.uniform(0.55, 0.95)
    ct, st = np.cos(theta), np.sin(theta)
    u = (gx - cx) * ct + (gy - cy) * st
    v = -(gx - cx) * st + (gy - cy) * ct
    vals[(u / a) ** 2 + (v / b) ** 2 <= 1.0] = speed


def generate_phantom(spec: PhantomSpec, seed: int | None = None) -> SosMap:
    """One phantom: water background, fatty body disk, tissue ellipses.

    A single 3x3 averaging pass smooths single-cell discontinuities; values
    are clamped to the spec's speed range (the average of in-range values is
    already in range, so the clamp is a guard, not a correction).
    """
    if seed is None:
        seed = spec.seed
    rng = np.random.default_rng(seed)
    c_min, c_max = spec.speed_range
    span = c_max - c_min

    gx, gy = _grid_xy(spec.n, spec.dx)
    body = body_mask(spec)
    vals = np.full((spec.n, spec.n), float(spec.background_speed))
    c_fat = c_min + span * rng.uniform(0.15, 0.35)
    vals[body] = c_fat

    lo, hi = spec.inclusion_count_range
    for _ in range(int(rng.integers(lo, hi + 1))):
        _add_ellipse(vals, gx, gy, spec, rng)

    # top up inclusions until the tissue-fraction target is met
    threshold = 0.5 * (c_min + c_max)
    body_cells = body.sum()
    for _ in range(_MAX_EXTRA_INCLUSIONS):
        frac = np.count_nonzero(vals[body] >= threshold) / body_cells
        if frac >= spec.dense_fraction:
            break
        _add_ellipse(vals, gx, gy, spec, rng)

    vals = uniform_filter(vals, size=3, mode="nearest")
    np.clip(vals, c_min, c_max, out=vals)
    return SosMap(values=vals, dx=spec.dx)


def dataset_class(index: int) -> str:
    return FATTY_CLASS if index % 2 == 0 else DENSE_CLASS


def generate_dataset(spec: PhantomSpec, count: int, seed: int) -> list[SosMap]:
    """`count` phantoms from seeds seed+0 .. seed+count-1, alternating the
    fatty class (the spec's own dense_fraction) with the dense class
    (dense_class_fraction). Element i never depends on count."""
    if count < 1:
        raise ConfigurationError("dataset count must be >= 1")
    dense_spec = replace(spec, dense_fraction=spec.dense_class_fraction)
    out = []
    for i in range(count):
        s = spec if dataset_class(i) == FATTY_CLASS else dense_spec
        out.append(generate_phantom(s, seed + i))
    return out
