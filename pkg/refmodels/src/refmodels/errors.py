"""Exception hierarchy for the reference-model package."""

from __future__ import annotations

__all__ = [
    "RefModelsError",
    "UnknownArchitectureError",
    "FormatError",
    "TrainingDivergedError",
]


class RefModelsError(Exception):
    """Base class for all errors raised by this package."""


class UnknownArchitectureError(RefModelsError, ValueError):
    """An architecture name outside the supported registry.

    Also a :class:`ValueError`: the name is a caller-supplied token, so
    callers validating user input can catch it alongside other bad values.
    """


class FormatError(RefModelsError):
    """A mask/image file does not follow the expected MetaImage layout."""


class TrainingDivergedError(RefModelsError):
    """Training produced a non-finite loss."""
