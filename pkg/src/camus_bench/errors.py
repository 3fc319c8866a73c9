"""Exception hierarchy shared by all camus_bench modules.

Every error raised on a data/format problem derives from
:class:`CamusBenchError`, so callers (notably the CLI) can map the whole
family onto a single exit code.
"""

from __future__ import annotations


class CamusBenchError(Exception):
    """Base class for all camus_bench data, format, and domain errors."""


class MaskFormatError(CamusBenchError):
    """A mask header file is malformed, or a required key is missing/invalid."""


class MaskTruncationError(MaskFormatError):
    """The raw payload size disagrees with the declared image dimensions."""


class LabelValidationError(CamusBenchError):
    """A mask contains label values outside the annotation alphabet."""


class ManifestError(CamusBenchError):
    """A cohort manifest is malformed (bad header, token, or duplicate row)."""


class ShapeError(CamusBenchError):
    """Two masks that must share dimensions/spacing do not."""


class DegenerateRegionError(CamusBenchError):
    """A region is too small (fewer than 3 pixels) to trace a contour."""


class MissingReferenceError(CamusBenchError):
    """A reference mask (or its structure region) is absent."""


class DegenerateAxisError(CamusBenchError):
    """A long-axis construction collapsed (zero length or no usable chord)."""


class DomainError(CamusBenchError):
    """A scalar argument is outside its mathematical domain."""
