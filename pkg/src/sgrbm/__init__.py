"""Sparse group RBMs and DBMs: training, exact oracles, AIS and sparseness."""
from ._kernels import BACKEND
from .errors import (
    ConfigurationError,
    DimensionError,
    EstimationError,
    InputError,
    NumericalError,
    ParameterError,
    ParseError,
    SgrbmError,
    UnsupportedOperation,
)
from .rbm import RbmParams, TrainConfig, cd_gradient, free_energy, hidden_probabilities
from .regularizer import Grouping, RegularizerConfig, regularized_cd_gradient

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigurationError",
    "DimensionError",
    "EstimationError",
    "Grouping",
    "InputError",
    "NumericalError",
    "ParameterError",
    "ParseError",
    "RbmParams",
    "RegularizerConfig",
    "SgrbmError",
    "TrainConfig",
    "UnsupportedOperation",
    "cd_gradient",
    "free_energy",
    "hidden_probabilities",
    "regularized_cd_gradient",
]
