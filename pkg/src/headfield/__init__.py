"""Latent-conditioned neural head field with feature-space volume rendering."""

from .config import FitConfig, ModelConfig, TrainConfig, desk_scale, micro
from .tensor import ComputationTape, Tensor

__version__ = "0.1.0"

__all__ = [
    "ComputationTape",
    "FitConfig",
    "ModelConfig",
    "Tensor",
    "TrainConfig",
    "desk_scale",
    "micro",
    "__version__",
]
