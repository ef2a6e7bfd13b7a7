"""Exception classes for coreset regression."""


class CoresetError(Exception):
    """Base exception for coreset regression errors."""
    pass


class CoresetValidationError(CoresetError):
    """Raised when a loss, coreset or configuration fails validation."""
    pass


class CsvIngestionError(CoresetError):
    """Raised when a CSV dataset cannot be converted into a stream."""
    pass


class SolverError(CoresetError):
    """Raised when a reduced problem cannot be set up or solved at all."""
    pass


class ExperimentError(CoresetError):
    """Raised when an experiment run or its manifest is invalid."""
    pass
