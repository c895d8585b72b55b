"""Physical-layer security calculator and simulator for TDD massive-MIMO downlinks."""

from .config import AttackKind, AttackSpec, SeedPath, SystemConfig, derive_seed, validate
from .errors import (AttackMismatch, ConvergenceError, DegenerateEstimate, DimensionError,
                     EmptyGrid, MimosecError, ParameterError, RegimeMismatch, UnknownFigure,
                     ViolatedInvariant)

__version__ = "0.1.0"

__all__ = [
    "AttackKind",
    "AttackSpec",
    "SeedPath",
    "SystemConfig",
    "derive_seed",
    "validate",
    "AttackMismatch",
    "ConvergenceError",
    "DegenerateEstimate",
    "DimensionError",
    "EmptyGrid",
    "MimosecError",
    "ParameterError",
    "RegimeMismatch",
    "UnknownFigure",
    "ViolatedInvariant",
    "__version__",
]
