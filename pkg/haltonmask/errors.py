"""HALTONMASK.ERRORS

Exceptions raised by haltonmask. The CLI maps each family to an exit code.

"""
from typing import Any, Optional

__all__ = [
    "HaltonMaskError",
    "InvalidArgumentError",
    "ResourceLimitError",
    "InvariantViolationError",
    "ContractViolationError",
]


class HaltonMaskError(Exception):
    """Base class for all haltonmask errors."""


class InvalidArgumentError(HaltonMaskError, ValueError):
    """A precondition of an operation is not satisfied."""


class ResourceLimitError(HaltonMaskError):
    """The requested computation exceeds a tractability bound."""


class InvariantViolationError(HaltonMaskError):
    """An internal invariant was broken."""


class ContractViolationError(InvariantViolationError):
    """A marginal predictor returned an invalid distribution.

    Args:
        message: diagnostic.
        cell: the offending cell, if known.

    """

    def __init__(self, message: str, cell: Optional[Any] = None):
        super().__init__(message)
        self.cell = cell
