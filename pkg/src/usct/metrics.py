"""Image/waveform quality metrics and the interpolation baselines.

SSIM uses the fixed contract: 7x7 Gaussian windows (sigma 1.5, normalized),
K1=0.01, K2=0.03, averaged over all positions where the full window fits.
PSNR returns math.inf as the saturated sentinel when the error is exactly
zero. Cosine similarity of a zero-norm operand is 0 by convention, so
untrained (all-zero) predictions score 0 rather than NaN.

The baselines upscale waveform cubes along the receiver (and, if needed,
source) ring axis: nearest-row replication with ties toward the lower real
index, and clamped Catmull-Rom cubic interpolation that reproduces constant
and linear profiles exactly (one-sided end tangents, linear extension past
the last knot). Both are precomputed weight matrices, hence exactly linear
operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .geometry import AcquisitionConfig, subsample_indices
from .wavesim import WaveformCube

SSIM_WINDOW = 7
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

DEFAULT_THRESHOLDS = (0.8, 0.85, 0.9)


def _image(x) -> np.ndarray:
    vals = getattr(x, "values", x)
    arr = np.asarray(vals, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigurationError(f"expected a 2-d image, got shape {arr.shape}")
    return arr


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    w = g[:, None] * g[None, :]
    return w / w.sum()


def _windowed_means(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(img, w.shape)
    return np.tensordot(win, w, axes=([2, 3], [0, 1]))


def ssim(a, b, dynamic_range: float) -> float:
    """Mean local structural similarity; symmetric in (a, b), 1 at identity."""
    ia, ib = _image(a), _image(b)
    if ia.shape != ib.shape:
        raise ConfigurationError(f"ssim shape mismatch {ia.shape} vs {ib.shape}")
    if dynamic_range <= 0:
        raise ConfigurationError("dynamic_range must be positive")
    if min(ia.shape) < SSIM_WINDOW:
        raise ConfigurationError(
            f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mu_a = _windowed_means(ia, w)
    mu_b = _windowed_means(ib, w)
    s_aa = _windowed_means(ia * ia, w) - mu_a * mu_a
    s_bb = _windowed_means(ib * ib, w) - mu_b * mu_b
    s_ab = _windowed_means(ia * ib, w) - mu_a * mu_b
    c1 = (SSIM_K1 * dynamic_range) ** 2
    c2 = (SSIM_K2 * dynamic_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * s_ab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (s_aa + s_bb + c2)
    return float(np.mean(num / den))


def psnr(a, b, peak: float) -> float:
    """10*log10(peak^2 / mse); math.inf when the images are identical."""
    ia, ib = _image(a), _image(b)
    if ia.shape != ib.shape:
        raise ConfigurationError(f"psnr shape mismatch {ia.shape} vs {ib.shape}")
    if peak <= 0:
        raise ConfigurationError("peak must be positive")
    mse = float(np.mean((ia - ib) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def cosine_similarity(a, b) -> float:
    va = np.asarray(getattr(a, "values", a), dtype=np.float64).ravel()
    vb = np.asarray(getattr(b, "values", b), dtype=np.float64).ravel()
    if va.shape != vb.shape:
        raise ConfigurationError(
            f"cosine shape mismatch {va.shape} vs {vb.shape}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


def threshold_fractions(ssims, thresholds=DEFAULT_THRESHOLDS) -> list[float]:
    """Fraction of values strictly above each threshold."""
    vals = np.asarray(ssims, dtype=np.float64)
    if vals.size == 0:
        raise ConfigurationError("threshold_fractions needs a non-empty list")
    ths = list(thresholds)
    if any(ths[i] > ths[i + 1] for i in range(len(ths) - 1)):
        raise ConfigurationError("thresholds must be sorted ascending")
    return [float(np.mean(vals > t)) for t in ths]


@dataclass(frozen=True)
class MetricReport:
    """Per-sample reconstruction quality plus the usual summaries."""
    ssim_values: list[float]
    psnr_values: list[float]
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    ssim_mean: float = field(init=False)
    ssim_std: float = field(init=False)
    psnr_mean: float = field(init=False)
    psnr_std: float = field(init=False)
    fractions_above: list[float] = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.ssim_values, dtype=np.float64)
        p = np.asarray(self.psnr_values, dtype=np.float64)
        if s.size == 0 or s.size != p.size:
            raise ConfigurationError("report needs matching non-empty metric lists")
        object.__setattr__(self, "ssim_mean", float(s.mean()))
        object.__setattr__(self, "ssim_std", float(s.std()))
        finite = p[np.isfinite(p)]
        object.__setattr__(self, "psnr_mean",
                           float(finite.mean()) if finite.size else math.inf)
        object.__setattr__(self, "psnr_std",
                           float(finite.std()) if finite.size else 0.0)
        object.__setattr__(self, "fractions_above",
                           threshold_fractions(s, self.thresholds))

    def to_dict(self) -> dict:
        return {
            "ssim": self.ssim_values,
            "psnr": self.psnr_values,
            "ssim_mean": self.ssim_mean,
            "ssim_std": self.ssim_std,
            "psnr_mean": self.psnr_mean,
            "psnr_std": self.psnr_std,
            "thresholds": list(self.thresholds),
            "fractions_above": self.fractions_above,
        }


def compute_report(recons, labels, dynamic_range: float,
                   thresholds=DEFAULT_THRESHOLDS) -> MetricReport:
    if len(recons) != len(labels):
        raise ConfigurationError("recon/label count mismatch")
    ssims = [ssim(r, l, dynamic_range) for r, l in zip(recons, labels)]
    psnrs = [psnr(r, l, dynamic_range) for r, l in zip(recons, labels)]
    return MetricReport(ssim_values=ssims, psnr_values=psnrs,
                        thresholds=tuple(thresholds))


# ---------------------------------------------------------------------------
# interpolation baselines


def _nearest_map(dense_count: int, sparse_count: int) -> np.ndarray:
    """Dense slot -> sparse row index, ties toward the lower real index."""
    k = dense_count // sparse_count
    out = np.empty(dense_count, dtype=np.intp)
    for i in range(dense_count):
        q, r = divmod(i, k)
        j = q if 2 * r <= k else q + 1
        out[i] = min(j, sparse_count - 1)
    return out


def _catmull_rom_weights(dense_count: int, sparse_count: int) -> np.ndarray:
    """(dense_count, sparse_count) weight matrix for clamped C-R upscaling."""
    k = dense_count // sparse_count
    J = sparse_count
    W = np.zeros((dense_count, J))
    # tangents as linear combinations of knot values
    tangent = np.zeros((J, J))
    if J == 1:
        return np.ones((dense_count, 1))
    tangent[0, 0], tangent[0, 1] = -1.0, 1.0
    tangent[J - 1, J - 2], tangent[J - 1, J - 1] = -1.0, 1.0
    for j in range(1, J - 1):
        tangent[j, j - 1], tangent[j, j + 1] = -0.5, 0.5
    for i in range(dense_count):
        x = i / k
        s = int(np.floor(x))
        if s >= J - 1:
            # past the last knot: linear extension with the end tangent
            W[i, J - 1] += 1.0
            W[i] += (x - (J - 1)) * tangent[J - 1]
            continue
        t = x - s
        h00 = 2 * t ** 3 - 3 * t ** 2 + 1
        h10 = t ** 3 - 2 * t ** 2 + t
        h01 = -2 * t ** 3 + 3 * t ** 2
        h11 = t ** 3 - t ** 2
        W[i, s] += h00
        W[i, s + 1] += h01
        W[i] += h10 * tangent[s] + h11 * tangent[s + 1]
    return W


def _check_target(sparse: WaveformCube, target: AcquisitionConfig):
    a = sparse.acquisition
    si = subsample_indices(target.n_sources, a.n_sources)
    ri = subsample_indices(target.n_receivers, a.n_receivers)
    if a.time_steps != target.time_steps:
        raise ConfigurationError(
            f"time steps differ: {a.time_steps} vs {target.time_steps}")
    return si, ri


def nearest_interp(sparse: WaveformCube, target: AcquisitionConfig) -> WaveformCube:
    """Replicate each missing ring row from its nearest real row."""
    _check_target(sparse, target)
    a = sparse.acquisition
    vals = sparse.values
    rmap = _nearest_map(target.n_receivers, a.n_receivers)
    vals = vals[:, rmap, :]
    if target.n_sources != a.n_sources:
        smap = _nearest_map(target.n_sources, a.n_sources)
        vals = vals[smap, :, :]
    return WaveformCube(values=np.ascontiguousarray(vals), acquisition=target)


def bicubic_interp(sparse: WaveformCube, target: AcquisitionConfig) -> WaveformCube:
    """Catmull-Rom upscaling along the ring axes; exact on degree <= 1."""
    _check_target(sparse, target)
    a = sparse.acquisition
    vals = sparse.values
    Wr = _catmull_rom_weights(target.n_receivers, a.n_receivers)
    vals = np.einsum("dr,srk->sdk", Wr, vals, optimize=True)
    if target.n_sources != a.n_sources:
        Ws = _catmull_rom_weights(target.n_sources, a.n_sources)
        vals = np.einsum("ds,srk->drk", Ws, vals, optimize=True)
    return WaveformCube(values=np.ascontiguousarray(vals), acquisition=target)
