"""Core package for coreset regression."""

from .exceptions import (
    CoresetError,
    CoresetValidationError,
    CsvIngestionError,
    ExperimentError,
    SolverError,
)

__all__ = [
    "CoresetError",
    "CoresetValidationError",
    "CsvIngestionError",
    "SolverError",
    "ExperimentError",
]
