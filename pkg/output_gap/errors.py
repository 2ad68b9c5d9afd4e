"""
Exception hierarchy for the output-gap toolkit.

Every error raised on purpose by the package derives from ``OutputGapError`` so
the command-line entry point can report it as a structured message.
"""
from typing import Optional


class OutputGapError(Exception):
    """Base class for all toolkit errors."""


class StructuralError(OutputGapError, ValueError):
    """Dimensions, specification masks or input lengths do not fit together."""


class DomainError(OutputGapError, ValueError):
    """A parameter lies outside the domain of the function it was passed to."""


class NumericalError(OutputGapError, ArithmeticError):
    """A numerical step failed (singular covariance, non-finite sum)."""

    def __init__(self, message: str, time_index: Optional[int] = None):
        self.time_index = time_index
        if time_index is not None:
            message = f"{message} (t={time_index})"
        super().__init__(message)


class DegenerateChainError(NumericalError):
    """A convergence diagnostic is undefined because the chain does not move."""


class SeriesValidationError(OutputGapError, ValueError):
    """An input series violates the quarterly series contract."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SamplerError(OutputGapError):
    """A block of the sampler failed; carries where it happened."""

    def __init__(self, message: str, iteration: int, block: str):
        self.iteration = iteration
        self.block = block
        super().__init__(f"iteration {iteration}, block {block}: {message}")
