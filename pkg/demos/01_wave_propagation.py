"""Forward modeling walkthrough: one phantom, one shot, a full acquisition.

Generates a speed-of-sound phantom, fires a single transducer, and records
the ring. Saves the phantom, a gathered shot record, and the whole waveform
cube layout to demos/out/.

Run:  python3 demos/01_wave_propagation.py
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from usct import (AcquisitionConfig, PhantomSpec, RickerSource,
                  generate_phantom, grid_for, ring_for_grid,
                  simulate_acquisition, simulate_shot, transducer_positions)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# desk-scale setup: 0.3 MHz wavelet, 8 grid cells per wavelength
c0, f_peak = 1500.0, 3.0e5
dx = (c0 / f_peak) / 8
n, time_steps = 64, 256

grid = grid_for(n=n, dx=dx, time_steps=time_steps, c_max=1600.0,
                sponge_width=16)
ring = ring_for_grid(n, dx)
phantom = generate_phantom(PhantomSpec(n=n, dx=dx, dense_fraction=0.2),
                           seed=3)
wavelet = RickerSource(f_peak=f_peak)

print(f"grid: {n}x{n} interior, dx={dx * 1e3:.3f} mm, dt={grid.dt * 1e9:.1f} ns")
print(f"ring radius: {ring.radius * 1e3:.1f} mm, "
      f"map speeds {phantom.values.min():.0f}-{phantom.values.max():.0f} m/s")

# one shot: source at ring angle 0, record every ring position
positions = transducer_positions(32, ring)
traces = simulate_shot(phantom, grid, positions[0], positions, wavelet)
print(f"shot record: {traces.shape[0]} receivers x {traces.shape[1]} samples, "
      f"peak amplitude {np.abs(traces).max():.2e}")

fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
im = axes[0].imshow(phantom.values, cmap="viridis")
axes[0].set_title("speed-of-sound phantom (m/s)")
th = np.linspace(0, 2 * np.pi, 200)
axes[0].plot((ring.center[1] + ring.radius * np.sin(th)) / dx,
             (ring.center[0] + ring.radius * np.cos(th)) / dx, "w--", lw=0.8)
fig.colorbar(im, ax=axes[0], shrink=0.8)
scale = np.abs(traces).max()
axes[1].imshow(traces / scale, aspect="auto", cmap="seismic",
               vmin=-0.25, vmax=0.25)
axes[1].set_title("shot record (receiver vs time)")
axes[1].set_xlabel("time step")
axes[1].set_ylabel("receiver index")
fig.tight_layout()
fig.savefig(OUT / "01_shot_record.png", dpi=130)
print(f"wrote {OUT / '01_shot_record.png'}")

# full acquisition: 8 sources x 32 receivers
acq = AcquisitionConfig(8, 32, ring, time_steps, grid.dt)
cube = simulate_acquisition(phantom, acq, grid, wavelet)
print(f"waveform cube: sources x receivers x time = {cube.values.shape}")

fig, axes = plt.subplots(2, 4, figsize=(12, 5), sharex=True, sharey=True)
for i, ax in enumerate(axes.flat):
    ax.imshow(cube.values[i] / scale, aspect="auto", cmap="seismic",
              vmin=-0.25, vmax=0.25)
    ax.set_title(f"source {i}", fontsize=9)
fig.suptitle("one shot record per ring source")
fig.tight_layout()
fig.savefig(OUT / "01_waveform_cube.png", dpi=130)
print(f"wrote {OUT / '01_waveform_cube.png'}")
