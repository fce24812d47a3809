"""Sparse-to-dense waveform upscaling vs interpolation baselines.

Trains a small upscaler on (8,8) -> (8,32) pairs and compares its held-out
cosine similarity against nearest-row and bicubic interpolation and the raw
zero-filled input. Takes a few minutes (real training).

Run:  python3 demos/03_waveform_upscaling.py
"""

import time
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from usct import (AcquisitionConfig, PhantomSpec, RickerSource, RingGeometry,
                  UpscalerTrainConfig, WaveformCube, bicubic_interp,
                  cosine_similarity, generate_dataset, grid_for,
                  interleave_zeros, nearest_interp, simulate_acquisition,
                  subsample_indices, train_upscaler, upscale)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

c0, f_peak = 1500.0, 3.0e5
dx = (c0 / f_peak) / 24       # long wavelength relative to the ring
n, k, count = 64, 224, 24     # trimmed for demo runtime
grid = grid_for(n=n, dx=dx, time_steps=k, c_max=1600.0, sponge_width=16)
half = (n - 1) / 2 * dx
ring = RingGeometry(center=(half, half), radius=0.30 * (n - 1) * dx,
                    grid_n=n, dx=dx)
dense_cfg = AcquisitionConfig(8, 32, ring, k, grid.dt)
sparse_cfg = AcquisitionConfig(8, 8, ring, k, grid.dt)
wavelet = RickerSource(f_peak=f_peak)

print("simulating dense cubes...")
maps = generate_dataset(PhantomSpec(n=n, dx=dx, body_radius_fraction=0.45),
                        count, seed=100)
dense = [simulate_acquisition(m, dense_cfg, grid, wavelet) for m in maps]
ri = subsample_indices(32, 8)
sparse = [WaveformCube(values=np.ascontiguousarray(d.values[:, ri, :]),
                       acquisition=sparse_cfg) for d in dense]

n_test = 4
t0 = time.time()
print("training the upscaler (a few minutes)...")
model, history = train_upscaler(
    list(zip(sparse[:-n_test], dense[:-n_test])),
    UpscalerTrainConfig(epochs=20, lr=2e-3, batch_cubes=4, base_channels=8,
                        seed=0))
print(f"trained in {time.time() - t0:.0f}s, "
      f"loss {history[0]:.2e} -> {history[-1]:.2e}")

scores = {"upscaler": [], "nearest": [], "bicubic": [], "zero-fill": []}
for sp, dn in zip(sparse[-n_test:], dense[-n_test:]):
    scores["upscaler"].append(cosine_similarity(upscale(model, sp, dense_cfg), dn))
    scores["nearest"].append(cosine_similarity(nearest_interp(sp, dense_cfg), dn))
    scores["bicubic"].append(cosine_similarity(bicubic_interp(sp, dense_cfg), dn))
    scores["zero-fill"].append(
        cosine_similarity(interleave_zeros(sp, dense_cfg).values, dn.values))
for name, vals in scores.items():
    print(f"  {name:10s} mean cosine similarity {np.mean(vals):.4f}")

sp, dn = sparse[-1], dense[-1]
up = upscale(model, sp, dense_cfg)
near = nearest_interp(sp, dense_cfg)
zf = interleave_zeros(sp, dense_cfg)
scale = np.abs(dn.values[0]).max()
fig, axes = plt.subplots(1, 4, figsize=(14, 4), sharey=True)
for ax, (title, img) in zip(axes, [
        ("zero-filled input", zf.values[0]),
        ("nearest rows", near.values[0]),
        ("learned upscaler", up.values[0]),
        ("dense ground truth", dn.values[0])]):
    ax.imshow(img / scale, aspect="auto", cmap="seismic", vmin=-.3, vmax=.3)
    ax.set_title(title, fontsize=10)
axes[0].set_ylabel("receiver index")
fig.suptitle("source 0 shot record: (8,8) measurements to (8,32)")
fig.tight_layout()
fig.savefig(OUT / "03_upscaling.png", dpi=130)
print(f"wrote {OUT / '03_upscaling.png'}")
