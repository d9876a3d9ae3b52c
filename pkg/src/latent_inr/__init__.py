"""Video as a dictionary of per-frame latents driving a low-rank modulated INR."""

from .config import RunConfig, load_run_config, parse_run_config
from .encoding import FourierConfig, HashGridConfig, fourier_encode, hashgrid_encode, pixel_lattice
from .kernels import BACKEND
from .model import ConfigError, LatentINR, ModelConfig, decode_frame, decode_patch, init_model, modulate
from .training import AlignmentTarget, TrainConfig, TrainingDivergedError, fit, holdout_frames

__version__ = "0.1.0"

__all__ = [
    "AlignmentTarget",
    "BACKEND",
    "ConfigError",
    "FourierConfig",
    "HashGridConfig",
    "LatentINR",
    "ModelConfig",
    "RunConfig",
    "TrainConfig",
    "TrainingDivergedError",
    "decode_frame",
    "decode_patch",
    "fit",
    "fourier_encode",
    "hashgrid_encode",
    "holdout_frames",
    "init_model",
    "load_run_config",
    "modulate",
    "parse_run_config",
    "pixel_lattice",
]
