"""
ising_simreg - Ising similarity regression for multivariate binary responses.

This package provides:
- The pairwise binary model with interactions regressed on similarity matrices
- Exact and Gibbs simulation
- Pseudo-likelihood fitting with adaptive lasso paths and lambda selection
- Sandwich intervals for the post-selection refit
- Similarity construction from attributes and edge lists
- Monte Carlo benchmarks and graph export
"""

__version__ = "0.1.0"

from .benchmark import BenchmarkRunner
from .benchmark import ScenarioSpec
from .benchmark import run_benchmark
from .config import SimRegSettings
from .exceptions import InputError
from .exceptions import NumericalError
from .exceptions import SimRegError
from .io import FileResultStore
from .io import ResultStore
from .model import BinaryDataset
from .model import InteractionMatrix
from .model import ParameterSet
from .model import SimilarityMatrix
from .monitor import LoggingMonitor
from .monitor import PathMonitor
from .pipeline import IsingSimilarityRegression
from .sampler import SamplerConfig
from .sampler import simulate
from .selection import FitResult

__all__ = [
    "IsingSimilarityRegression",
    "SimRegSettings",
    "BinaryDataset",
    "SimilarityMatrix",
    "ParameterSet",
    "InteractionMatrix",
    "SamplerConfig",
    "simulate",
    "FitResult",
    "PathMonitor",
    "LoggingMonitor",
    "ResultStore",
    "FileResultStore",
    "ScenarioSpec",
    "BenchmarkRunner",
    "run_benchmark",
    "SimRegError",
    "InputError",
    "NumericalError",
]
