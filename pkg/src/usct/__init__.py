"""Sparse-data ultrasound computed tomography at desk scale.

Physics-based acoustic forward modeling generates dense waveform labels, a
learned upscaler turns sparse transducer measurements into dense waveforms,
and an inversion network reconstructs speed-of-sound maps. See README.md for
the pipeline layout and the demos/ scripts for worked examples.
"""

from .errors import (ConfigurationError, DataError, NumericError, StateError,
                     UsctError)
from .geometry import (AcquisitionConfig, RingGeometry, element_count,
                       ring_for_grid, sparsity_vs, subsample_indices,
                       transducer_positions)
from .phantoms import (PhantomSpec, SosMap, dataset_class, generate_dataset,
                       generate_phantom, tissue_fraction)
from .wavesim import (RickerSource, SimGrid, WaveformCube, cfl_dt, grid_for,
                      ricker, simulate_acquisition, simulate_shot)
from .upscaler import (InterleavedCube, UpscalerModel, UpscalerSpec,
                       UpscalerTrainConfig, build_upscaler, interleave_zeros,
                       plan_upscaler, train_upscaler, upscale)
from .inversion import (FwiModel, FwiTrainConfig, InversionNetSpec,
                        SourceEncodingSpec, build_fwi, build_inversionnet,
                        encode_sources, reconstruct, train_fwi)
from .metrics import (MetricReport, bicubic_interp, compute_report,
                      cosine_similarity, nearest_interp, psnr, ssim,
                      threshold_fractions)
from .container import read_tensors, write_tensors
from .config import ExperimentConfig

__version__ = "0.1.0"
