"""End-to-end pipeline on a miniature configuration.

Runs phantoms -> simulate -> train-wave -> upscale -> train-fwi -> evaluate
through the same staged machinery the CLI uses, then prints the report.

Run:  python3 demos/06_full_pipeline.py
"""

import json
from pathlib import Path

from usct import ExperimentConfig
from usct.pipeline import run_pipeline

OUT = Path(__file__).parent / "out" / "pipeline_run"

cfg = ExperimentConfig(
    seed=7,
    phantom_count=10,
    grid_n=32,
    points_per_wavelength=8.0,
    time_steps=128,
    sponge_width=12,
    body_radius_fraction=0.5,
    ring_radius_fraction=0.40,
    dense_sources=4,
    dense_receivers=16,
    sparse_sources=4,
    sparse_receivers=4,
    upscaler_epochs=6,
    upscaler_batch_cubes=4,
    upscaler_base_channels=6,
    fwi_epochs=10,
    fwi_batch=4,
    fwi_encoded_channels=4,
    fwi_base_channels=8,
    fwi_channel_cap=32,
)

report = run_pipeline(cfg, OUT)
print(f"\nmean SSIM {report.ssim_mean:.4f} (std {report.ssim_std:.4f})")
print(f"mean PSNR {report.psnr_mean:.2f} dB")
print(f"fractions above {report.thresholds}: {report.fractions_above}")

doc = json.loads((OUT / "report.json").read_text())
if "upscaler_cosine" in doc:
    for name, entry in doc["upscaler_cosine"].items():
        print(f"upscaler cosine [{name}]: {entry['mean']:.4f}")
print(f"\nartifacts in {OUT}:")
for p in sorted(OUT.iterdir()):
    print(f"  {p.name}")
