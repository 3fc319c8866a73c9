"""Mask file I/O, polar-to-Cartesian scan conversion, and cohort manifests.

The on-disk mask format is a MetaImage-style pair of files: a line-oriented
text header (``Key = Value``) and a separate raw payload with one unsigned
byte per pixel, row-major and width-fastest.  Required header keys are
``NDims`` (must be 2), ``DimSize`` (width height), ``ElementType``
(``MET_UCHAR``), ``ElementSpacing`` (lateral axial, in mm) and
``ElementDataFile`` (path relative to the header).  Unknown keys are
preserved verbatim on a read/write round-trip.

Cohort manifests are UTF-8 CSV files with the header row
``patient_id,view,instant,quality,ef_group[,fold]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    LabelValidationError,
    ManifestError,
    MaskFormatError,
    MaskTruncationError,
)

__all__ = [
    "ANNOTATION_LABELS",
    "EF_GROUPS",
    "INSTANTS",
    "LabelMask",
    "PatientCase",
    "PolarImage",
    "QUALITIES",
    "VIEWS",
    "load_manifest",
    "read_mask",
    "scan_convert",
    "write_mask",
]

ANNOTATION_LABELS = (0, 1, 2, 3)
"""Label alphabet for annotation masks: background, LV cavity, myocardium, LA."""

_REQUIRED_KEYS = ("NDims", "DimSize", "ElementType", "ElementSpacing", "ElementDataFile")
_ELEMENT_TYPE = "MET_UCHAR"


@dataclass(frozen=True, eq=False)
class LabelMask:
    """A 2D label or grayscale image with physical pixel spacing.

    Parameters
    ----------
    labels : numpy.ndarray
        Pixel grid of shape ``(height, width)``.  Annotation masks hold the
        values 0-3; grayscale images use the same container with values
        0-255.  ``scan_convert`` may produce a floating-point grid (see its
        ``quantize`` flag); file I/O requires integer-valued pixels.
    spacing_x : float
        Lateral pixel spacing in mm/pixel.
    spacing_z : float
        Axial pixel spacing in mm/pixel.
    extra_keys : tuple of (str, str)
        Unknown header keys read from a file, preserved on write in order.
    """

    labels: np.ndarray
    spacing_x: float
    spacing_z: float
    extra_keys: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError(f"labels must be 2D, got shape {arr.shape}")
        if arr.shape[0] <= 0 or arr.shape[1] <= 0:
            raise ValueError(f"mask dimensions must be positive, got {arr.shape}")
        if not (self.spacing_x > 0 and self.spacing_z > 0):
            raise ValueError(
                f"pixel spacing must be positive, got ({self.spacing_x}, {self.spacing_z})"
            )
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("pixel values must lie in [0, 255]")
        object.__setattr__(self, "labels", arr)
        extra = tuple(tuple(kv) for kv in self.extra_keys)
        if any(len(kv) != 2 or not all(isinstance(part, str) for part in kv) for kv in extra):
            raise ValueError("extra_keys must be (key, value) string pairs")
        object.__setattr__(self, "extra_keys", extra)

    @property
    def width(self) -> int:
        """Number of columns (lateral pixels)."""
        return int(self.labels.shape[1])

    @property
    def height(self) -> int:
        """Number of rows (axial pixels)."""
        return int(self.labels.shape[0])

    @property
    def spacing(self) -> tuple[float, float]:
        """``(spacing_x, spacing_z)`` in mm/pixel."""
        return (self.spacing_x, self.spacing_z)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelMask):
            return NotImplemented
        return (
            self.labels.shape == other.labels.shape
            and np.array_equal(self.labels, other.labels)
            and self.spacing_x == other.spacing_x
            and self.spacing_z == other.spacing_z
            and self.extra_keys == other.extra_keys
        )


@dataclass(frozen=True, eq=False)
class PolarImage:
    """A B-mode image expressed in polar (beam angle x depth) coordinates.

    Parameters
    ----------
    values : numpy.ndarray
        Beam-major sample grid of shape ``(n_beams, n_samples)``.
    angle_min, angle_max : float
        First/last beam steering angle in radians (0 points straight down
        the axial direction).
    sample_spacing : float
        Radial distance between consecutive samples along a beam, in mm.
    wavelength : float
        Imaging wavelength (lambda) in mm.  Scan conversion resamples onto a
        fixed grid of lambda/2 lateral by lambda/4 axial spacing.
    """

    values: np.ndarray
    angle_min: float
    angle_max: float
    sample_spacing: float
    wavelength: float = 0.6

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"values must be 2D (beams x samples), got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise ValueError("a polar image needs at least 2 beams")
        if arr.shape[1] < 2:
            raise ValueError("a polar image needs at least 2 samples per beam")
        if not self.angle_max > self.angle_min:
            raise ValueError("angle_max must exceed angle_min")
        if not self.sample_spacing > 0:
            raise ValueError("sample_spacing must be positive")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        object.__setattr__(self, "values", arr)

    @property
    def n_beams(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.values.shape[1])

    @property
    def max_depth(self) -> float:
        """Radial distance of the last sample, in mm."""
        return (self.n_samples - 1) * self.sample_spacing


VIEWS = ("2CH", "4CH")
INSTANTS = ("ED", "ES")
QUALITIES = ("Good", "Medium", "Poor")
EF_GROUPS = ("<=45%", ">=55%", "else")

_VIEW_TOKENS = {v.lower(): v for v in VIEWS}
_INSTANT_TOKENS = {v.lower(): v for v in INSTANTS}
_QUALITY_TOKENS = {v.lower(): v for v in QUALITIES}
_EF_TOKENS = {
    "<=45%": "<=45%",
    "≤45%": "<=45%",
    ">=55%": ">=55%",
    "≥55%": ">=55%",
    "else": "else",
}


@dataclass(frozen=True)
class PatientCase:
    """Identity and stratification attributes of one acquired image.

    ``fold`` is optional: manifests may carry a precomputed fold column, or
    folds can be generated from the stratification attributes (see
    ``camus_bench.harness.make_folds``).
    """

    patient_id: str
    view: str
    instant: str
    quality: str
    ef_group: str
    fold: int | None = None

    def __post_init__(self) -> None:
        if not self.patient_id:
            raise ValueError("patient_id must be non-empty")
        for name, value, allowed in (
            ("view", self.view, VIEWS),
            ("instant", self.instant, INSTANTS),
            ("quality", self.quality, QUALITIES),
            ("ef_group", self.ef_group, EF_GROUPS),
        ):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {value!r}")

    @property
    def key(self) -> tuple[str, str, str]:
        """The manifest uniqueness key ``(patient_id, view, instant)``."""
        return (self.patient_id, self.view, self.instant)


def read_mask(path: str | Path, strict_labels: bool = False) -> LabelMask:
    """Read a mask (header + raw payload) from ``path``.

    Parameters
    ----------
    path : path-like
        Location of the text header file.
    strict_labels : bool
        When true, reject pixel values outside the annotation alphabet
        {0, 1, 2, 3}.

    Returns
    -------
    LabelMask

    Raises
    ------
    MaskFormatError
        Malformed header line, missing required key, or invalid value for a
        required key.
    MaskTruncationError
        Declared ``DimSize`` disagrees with the raw payload byte count.
    LabelValidationError
        ``strict_labels`` is set and a pixel value exceeds 3.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MaskFormatError(f"header file not found: {path}") from None

    entries: list[tuple[str, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise MaskFormatError(f"{path}:{lineno}: malformed header line (no '='): {line!r}")
        key, _, value = line.partition("=")
        entries.append((key.strip(), value.strip()))

    header = dict(entries)
    if len(header) != len(entries):
        seen: set[str] = set()
        for key, _ in entries:
            if key in seen:
                raise MaskFormatError(f"{path}: duplicate header key {key!r}")
            seen.add(key)
    for key in _REQUIRED_KEYS:
        if key not in header:
            raise MaskFormatError(f"{path}: missing required header key {key!r}")

    if header["NDims"] != "2":
        raise MaskFormatError(f"{path}: NDims must be 2, got {header['NDims']!r}")
    if header["ElementType"] != _ELEMENT_TYPE:
        raise MaskFormatError(
            f"{path}: ElementType must be {_ELEMENT_TYPE}, got {header['ElementType']!r}"
        )

    dims = header["DimSize"].split()
    if len(dims) != 2 or not all(tok.isdigit() for tok in dims):
        raise MaskFormatError(f"{path}: DimSize must be two integers, got {header['DimSize']!r}")
    width, height = int(dims[0]), int(dims[1])
    if width <= 0 or height <= 0:
        raise MaskFormatError(f"{path}: DimSize entries must be positive, got {width} {height}")

    spacing_toks = header["ElementSpacing"].split()
    if len(spacing_toks) != 2:
        raise MaskFormatError(
            f"{path}: ElementSpacing must be two decimals, got {header['ElementSpacing']!r}"
        )
    try:
        spacing_x, spacing_z = (float(tok) for tok in spacing_toks)
    except ValueError:
        raise MaskFormatError(
            f"{path}: ElementSpacing must be two decimals, got {header['ElementSpacing']!r}"
        ) from None
    if not (spacing_x > 0 and spacing_z > 0):
        raise MaskFormatError(f"{path}: ElementSpacing entries must be positive")

    data_path = path.parent / header["ElementDataFile"]
    try:
        raw = data_path.read_bytes()
    except FileNotFoundError:
        raise MaskFormatError(f"{path}: data file not found: {data_path}") from None
    expected = width * height
    if len(raw) != expected:
        raise MaskTruncationError(
            f"{path}: raw payload has {len(raw)} bytes but DimSize "
            f"{width} {height} requires {expected}"
        )

    labels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy()
    if strict_labels and labels.size and labels.max() > max(ANNOTATION_LABELS):
        bad = int(labels.max())
        raise LabelValidationError(
            f"{path}: label value {bad} outside annotation alphabet {ANNOTATION_LABELS}"
        )

    extra = tuple((k, v) for k, v in entries if k not in _REQUIRED_KEYS)
    return LabelMask(labels=labels, spacing_x=spacing_x, spacing_z=spacing_z, extra_keys=extra)


def write_mask(mask: LabelMask, path: str | Path) -> None:
    """Write ``mask`` as a header/raw file pair rooted at ``path``.

    The header is written to ``path`` and the payload next to it with a
    ``.raw`` suffix.  Header keys are emitted in a fixed order (``NDims``,
    ``DimSize``, ``ElementType``, ``ElementSpacing``, preserved unknown keys,
    ``ElementDataFile`` last) so the output is byte-deterministic.

    Raises
    ------
    ValueError
        The mask holds non-integer pixel values (quantize first).
    OSError
        The destination is not writable.
    """
    path = Path(path)
    arr = np.asarray(mask.labels)
    as_bytes = arr.astype(np.uint8)
    if not np.array_equal(as_bytes, arr):
        raise ValueError("mask values must be integers in [0, 255] to be written")

    raw_name = path.stem + ".raw"
    lines = [
        "NDims = 2",
        f"DimSize = {mask.width} {mask.height}",
        f"ElementType = {_ELEMENT_TYPE}",
        f"ElementSpacing = {float(mask.spacing_x)} {float(mask.spacing_z)}",
    ]
    lines.extend(f"{key} = {value}" for key, value in mask.extra_keys)
    lines.append(f"ElementDataFile = {raw_name}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    as_bytes.tofile(path.parent / raw_name)


def _sector_bounds(polar: PolarImage) -> tuple[float, float, float, float]:
    """Bounding box (x_min, x_max, z_min, z_max) of the imaging sector in mm."""
    r = polar.max_depth
    candidates = [polar.angle_min, polar.angle_max]
    for special in (0.0, math.pi / 2, -math.pi / 2):
        if polar.angle_min < special < polar.angle_max:
            candidates.append(special)
    xs = [r * math.sin(a) for a in candidates] + [0.0]
    zs = [r * math.cos(a) for a in candidates] + [0.0]
    return (min(xs), max(xs), min(zs), max(zs))


def scan_convert(
    polar: PolarImage,
    interpolation: str = "bilinear",
    quantize: bool = False,
) -> LabelMask:
    """Resample a polar image onto the canonical Cartesian grid.

    The output grid covers the sector bounding box with pixel spacing fixed
    at wavelength/2 laterally and wavelength/4 axially; the apex sits at
    z = 0 on the first grid row boundary.  Each Cartesian pixel centre inside
    the sector is interpolated from the surrounding polar samples; pixels
    outside the sector are 0.

    Parameters
    ----------
    polar : PolarImage
    interpolation : {"bilinear", "nearest"}
        Grayscale images should use bilinear interpolation; label masks must
        use nearest-neighbour so label values do not blend.
    quantize : bool
        When true, round to the nearest integer and store as unsigned bytes
        (required before ``write_mask``).  When false the grid keeps full
        floating-point precision.

    Returns
    -------
    LabelMask
        Grayscale-mode mask with spacing  (wavelength/2, wavelength/4).
    """
    if interpolation not in ("bilinear", "nearest"):
        raise ValueError(f"interpolation must be 'bilinear' or 'nearest', got {interpolation!r}")

    spacing_x = polar.wavelength / 2.0
    spacing_z = polar.wavelength / 4.0
    x_min, x_max, z_min, z_max = _sector_bounds(polar)
    width = int(math.ceil((x_max - x_min) / spacing_x)) + 1
    height = int(math.ceil((z_max - z_min) / spacing_z)) + 1

    xs = x_min + spacing_x * np.arange(width)
    zs = z_min + spacing_z * np.arange(height)
    grid_x, grid_z = np.meshgrid(xs, zs)

    radius = np.hypot(grid_x, grid_z)
    theta = np.arctan2(grid_x, grid_z)

    beam_step = (polar.angle_max - polar.angle_min) / (polar.n_beams - 1)
    beam_frac = (theta - polar.angle_min) / beam_step
    radius_frac = radius / polar.sample_spacing

    inside = (
        (theta >= polar.angle_min)
        & (theta <= polar.angle_max)
        & (radius <= polar.max_depth)
    )

    values = polar.values
    if interpolation == "nearest":
        beam_idx = np.clip(np.rint(beam_frac).astype(np.intp), 0, polar.n_beams - 1)
        radius_idx = np.clip(np.rint(radius_frac).astype(np.intp), 0, polar.n_samples - 1)
        out = values[beam_idx, radius_idx]
    else:
        beam_lo = np.clip(np.floor(beam_frac).astype(np.intp), 0, polar.n_beams - 2)
        radius_lo = np.clip(np.floor(radius_frac).astype(np.intp), 0, polar.n_samples - 2)
        beam_w = beam_frac - beam_lo
        radius_w = radius_frac - radius_lo
        v00 = values[beam_lo, radius_lo]
        v01 = values[beam_lo, radius_lo + 1]
        v10 = values[beam_lo + 1, radius_lo]
        v11 = values[beam_lo + 1, radius_lo + 1]
        # Two-stage lerp keeps constant fields exactly constant.
        lo = v00 + radius_w * (v01 - v00)
        hi = v10 + radius_w * (v11 - v10)
        out = lo + beam_w * (hi - lo)

    out = np.where(inside, out, 0.0)
    if quantize:
        out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return LabelMask(labels=out, spacing_x=spacing_x, spacing_z=spacing_z)


_MANIFEST_COLUMNS = ("patient_id", "view", "instant", "quality", "ef_group")


def _canonical_token(kind: str, token: str, row: int) -> str:
    table = {
        "view": _VIEW_TOKENS,
        "instant": _INSTANT_TOKENS,
        "quality": _QUALITY_TOKENS,
    }.get(kind)
    if table is not None:
        canonical = table.get(token.strip().lower())
    else:
        canonical = _EF_TOKENS.get(token.strip().lower())
    if canonical is None:
        raise ManifestError(f"row {row}: unknown {kind} token {token!r}")
    return canonical


def load_manifest(path: str | Path) -> list[PatientCase]:
    """Load a cohort manifest CSV into a list of :class:`PatientCase`.

    The header row must be ``patient_id,view,instant,quality,ef_group`` with
    an optional trailing ``fold`` column.  Enumeration tokens are matched
    case-insensitively; ``<=45%``/``>=55%`` also accept their Unicode forms.

    Raises
    ------
    ManifestError
        Missing/wrong header, unknown token (with row number), bad fold
        value, or a duplicate ``(patient_id, view, instant)`` key.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as handle:
        rows = list(csv.reader(handle))
    rows = [row for row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ManifestError(f"{path}: empty manifest (missing header row)")

    header = [cell.strip().lower() for cell in rows[0]]
    has_fold = header == list(_MANIFEST_COLUMNS) + ["fold"]
    if not has_fold and header != list(_MANIFEST_COLUMNS):
        raise ManifestError(
            f"{path}: header must be {','.join(_MANIFEST_COLUMNS)}[,fold], "
            f"got {','.join(header)!r}"
        )

    cases: list[PatientCase] = []
    seen: set[tuple[str, str, str]] = set()
    expected_len = len(_MANIFEST_COLUMNS) + (1 if has_fold else 0)
    for row_number, row in enumerate(rows[1:], start=2):
        if len(row) != expected_len:
            raise ManifestError(
                f"row {row_number}: expected {expected_len} columns, got {len(row)}"
            )
        patient_id = row[0].strip()
        if not patient_id:
            raise ManifestError(f"row {row_number}: empty patient_id")
        view = _canonical_token("view", row[1], row_number)
        instant = _canonical_token("instant", row[2], row_number)
        quality = _canonical_token("quality", row[3], row_number)
        ef_group = _canonical_token("ef_group", row[4], row_number)
        fold: int | None = None
        if has_fold and row[5].strip():
            try:
                fold = int(row[5])
            except ValueError:
                raise ManifestError(
                    f"row {row_number}: fold must be an integer, got {row[5]!r}"
                ) from None
        key = (patient_id, view, instant)
        if key in seen:
            raise ManifestError(
                f"row {row_number}: duplicate case {patient_id},{view},{instant}"
            )
        seen.add(key)
        cases.append(
            PatientCase(
                patient_id=patient_id,
                view=view,
                instant=instant,
                quality=quality,
                ef_group=ef_group,
                fold=fold,
            )
        )
    return cases
