"""Simulation and verification of eigenvalue, eigenvector and angle fluctuations in spiked covariance models."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    DegenerateProjection,
    ModelError,
    NonConvergence,
    PackMismatch,
    ShapeMismatch,
    SpikelabError,
    TooFewSamples,
    TransitionWindow,
)
from .model import DistributionFamily, ModelConfig, RunConfig, SpikeSpec, load_config, sample_data  # noqa: F401
from .theory import predict  # noqa: F401
from .fluctuations import run_ensemble  # noqa: F401
