"""Simulation and analysis of a multiplexed fibre source of heralded single photons."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    EstimatorError,
    GridMismatchError,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DegenerateInputError",
    "DomainError",
    "EstimatorError",
    "GridMismatchError",
]
