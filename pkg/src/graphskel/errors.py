"""Exception types shared across the package.

Bad arguments raise plain ValueError; these classes mark conditions that map
to dedicated CLI exit codes.
"""
from __future__ import annotations

__all__ = ["StructureError", "NumericalError", "GenerationError", "CloudParseError"]


class StructureError(RuntimeError):
    """The recovered clusters cannot form a valid graph (scale misconfiguration)."""


class NumericalError(RuntimeError):
    """An optimizer or likelihood evaluation produced non-finite values."""


class GenerationError(RuntimeError):
    """The synthetic-graph generator exhausted its retry budget."""


class CloudParseError(ValueError):
    """A point-cloud file could not be parsed; carries the offending line."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        super().__init__(message if line_number is None else f"line {line_number}: {message}")
