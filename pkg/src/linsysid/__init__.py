"""Identification of linear dynamical systems from full or partial observations."""

__version__ = "0.1.0"

from ._validation import RankDeficientError
from .model import (
    DescentReport,
    HyperParams,
    ObservedData,
    Trajectory,
    simulate_full,
    simulate_observed,
)
from .realization import (
    ImpulseResponse,
    SilvermanResult,
    SystemRealization,
    hankel,
    markov_params,
    minimal_realization,
    silverman_order,
    structure_matrices,
)

__all__ = [
    "__version__",
    "RankDeficientError",
    "Trajectory",
    "ObservedData",
    "HyperParams",
    "DescentReport",
    "simulate_full",
    "simulate_observed",
    "ImpulseResponse",
    "SystemRealization",
    "SilvermanResult",
    "markov_params",
    "hankel",
    "structure_matrices",
    "silverman_order",
    "minimal_realization",
]
