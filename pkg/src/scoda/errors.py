"""Exception types shared across the package.

Every error that can reach the CLI maps onto one of four buckets
(check failure, config error, I/O error, numerical divergence); keeping
the hierarchy flat makes that mapping trivial.
"""


class ScodaError(Exception):
    """Base class for all package errors."""


class ShapeError(ScodaError):
    """Operand shapes are incompatible with the requested operation."""


class DegenerateBatchError(ScodaError):
    """A train-mode batch is too small to normalize (fewer than 2 rows)."""


class ConfigError(ScodaError):
    """A run configuration failed validation before any side effects."""


class DataError(ScodaError):
    """A dataset file or dataset construction is malformed."""


class CheckpointError(ScodaError):
    """A checkpoint file is missing, truncated, or structurally wrong."""


class NumericsError(ScodaError):
    """A value that must be finite is NaN or infinite."""


class DivergenceError(ScodaError):
    """A training loss became non-finite; carries the failing step index."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")
