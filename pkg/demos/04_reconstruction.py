"""Speed-of-sound reconstruction from waveform cubes.

Trains the inversion network on a small phantom family and shows held-out
reconstructions next to the ground truth, with SSIM/PSNR scores. Takes a
few minutes (real training).

Run:  python3 demos/04_reconstruction.py
"""

import time
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from usct import (AcquisitionConfig, FwiTrainConfig, PhantomSpec,
                  RickerSource, generate_dataset, grid_for, psnr,
                  reconstruct, ring_for_grid, simulate_acquisition, ssim,
                  train_fwi)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

c0, f_peak = 1500.0, 3.0e5
dx = (c0 / f_peak) / 8
n, k, count = 32, 160, 48
grid = grid_for(n=n, dx=dx, time_steps=k, c_max=1600.0, sponge_width=12)
ring = ring_for_grid(n, dx)
acq = AcquisitionConfig(8, 32, ring, k, grid.dt)
wavelet = RickerSource(f_peak=f_peak)

print("simulating waveform cubes...")
spec = PhantomSpec(n=n, dx=dx, body_radius_fraction=0.55,
                   inclusion_count_range=(1, 3),
                   inclusion_axis_range=(0.25, 0.55), dense_fraction=0.05,
                   dense_class_fraction=0.35)
maps = generate_dataset(spec, count, seed=300)
cubes = [simulate_acquisition(m, acq, grid, wavelet) for m in maps]

n_test = 6
t0 = time.time()
print("training the inversion network (a few minutes)...")
model, history = train_fwi(
    list(zip(cubes[:-n_test], maps[:-n_test])),
    FwiTrainConfig(speed_range=(1400.0, 1600.0), epochs=120, lr=1e-2,
                   lr_decay=0.985, batch=4, seed=0, encoded_channels=8,
                   random_mask=False, base_channels=16, channel_cap=128))
print(f"trained in {time.time() - t0:.0f}s, "
      f"loss {history[0]:.2e} -> {history[-1]:.2e}")

fig, axes = plt.subplots(2, n_test, figsize=(2.2 * n_test, 5))
for i, (cube, truth) in enumerate(zip(cubes[-n_test:], maps[-n_test:])):
    recon = reconstruct(model, cube)
    s = ssim(recon, truth, 200.0)
    p = psnr(recon, truth, 200.0)
    axes[0, i].imshow(truth.values, cmap="viridis", vmin=1400, vmax=1600)
    axes[1, i].imshow(recon.values, cmap="viridis", vmin=1400, vmax=1600)
    axes[1, i].set_title(f"SSIM {s:.2f} / {p:.1f} dB", fontsize=8)
    axes[0, i].axis("off")
    axes[1, i].axis("off")
    print(f"  held-out phantom {i}: SSIM {s:.3f}, PSNR {p:.2f} dB")
axes[0, 0].set_ylabel("truth")
axes[1, 0].set_ylabel("reconstruction")
fig.suptitle("held-out reconstructions (top: truth, bottom: network)")
fig.tight_layout()
fig.savefig(OUT / "04_reconstructions.png", dpi=130)
print(f"wrote {OUT / '04_reconstructions.png'}")
