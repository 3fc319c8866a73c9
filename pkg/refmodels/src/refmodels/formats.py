"""Minimal 2D MetaImage (.mhd + .raw) reader/writer.

The benchmark engine exchanges images and masks as a text header (``.mhd``)
next to a raw uint8 payload (``.raw``): ``NDims = 2``, ``DimSize = <w> <h>``,
``ElementType = MET_UCHAR``, ``ElementSpacing = <sx> <sz>`` (mm/pixel,
lateral then axial), ``ElementDataFile = <name>`` last; pixels row-major,
width fastest.  This module implements exactly that contract so exported
predictions are scorable by ``camus-bench`` without sharing any code with it.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

__all__ = ["GrayImage", "read_image", "write_image", "atomic_write_image"]

_ELEMENT_TYPE = "MET_UCHAR"
_REQUIRED = ("NDims", "DimSize", "ElementType", "ElementSpacing", "ElementDataFile")


@dataclass(frozen=True)
class GrayImage:
    """A 2D uint8 image (or label mask) with physical pixel spacing in mm."""

    pixels: np.ndarray
    spacing_x: float
    spacing_z: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"pixels must be a non-empty 2D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {arr.dtype}")
        if not (self.spacing_x > 0 and self.spacing_z > 0):
            raise ValueError("spacings must be positive")

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


def read_image(path: str | Path) -> GrayImage:
    """Read a header/raw pair rooted at the ``.mhd`` path.

    Raises
    ------
    FormatError
        Missing files, malformed header lines, unsupported element type, or
        a payload size that disagrees with ``DimSize``.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FormatError(f"header file not found: {path}") from None

    header: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: malformed header line: {line!r}")
        key, _, value = line.partition("=")
        header[key.strip()] = value.strip()

    for key in _REQUIRED:
        if key not in header:
            raise FormatError(f"{path}: missing required header key {key!r}")
    if header["NDims"] != "2":
        raise FormatError(f"{path}: NDims must be 2, got {header['NDims']!r}")
    if header["ElementType"] != _ELEMENT_TYPE:
        raise FormatError(
            f"{path}: ElementType must be {_ELEMENT_TYPE}, got {header['ElementType']!r}"
        )

    dims = header["DimSize"].split()
    if len(dims) != 2 or not all(tok.isdigit() for tok in dims):
        raise FormatError(f"{path}: DimSize must be two integers, got {header['DimSize']!r}")
    width, height = int(dims[0]), int(dims[1])
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: DimSize entries must be positive")

    spacing = header["ElementSpacing"].split()
    try:
        spacing_x, spacing_z = (float(tok) for tok in spacing)
    except ValueError:
        raise FormatError(
            f"{path}: ElementSpacing must be two decimals, got {header['ElementSpacing']!r}"
        ) from None
    if len(spacing) != 2 or not (spacing_x > 0 and spacing_z > 0):
        raise FormatError(f"{path}: ElementSpacing must be two positive decimals")

    data_path = path.parent / header["ElementDataFile"]
    try:
        raw = data_path.read_bytes()
    except FileNotFoundError:
        raise FormatError(f"{path}: data file not found: {data_path}") from None
    if len(raw) != width * height:
        raise FormatError(
            f"{path}: raw payload has {len(raw)} bytes but DimSize "
            f"{width} {height} requires {width * height}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy()
    return GrayImage(pixels=pixels, spacing_x=spacing_x, spacing_z=spacing_z)


def _header_text(image: GrayImage, raw_name: str) -> str:
    lines = [
        "NDims = 2",
        f"DimSize = {image.width} {image.height}",
        f"ElementType = {_ELEMENT_TYPE}",
        f"ElementSpacing = {float(image.spacing_x)} {float(image.spacing_z)}",
        f"ElementDataFile = {raw_name}",
    ]
    return "\n".join(lines) + "\n"


def write_image(image: GrayImage, path: str | Path) -> None:
    """Write the header to ``path`` and the payload next to it as ``.raw``."""
    path = Path(path)
    raw_name = path.stem + ".raw"
    (path.parent / raw_name).write_bytes(image.pixels.tobytes())
    path.write_text(_header_text(image, raw_name), encoding="utf-8")


def atomic_write_image(image: GrayImage, path: str | Path) -> None:
    """Write a header/raw pair so readers never observe a partial file.

    Both files are staged under temporary names in the destination directory
    and moved into place with :func:`os.replace` (payload first, so a visible
    header always refers to complete data).
    """
    path = Path(path)
    raw_name = path.stem + ".raw"

    def _stage(data: bytes, final: Path) -> None:
        fd, tmp = tempfile.mkstemp(dir=final.parent, prefix=f".{final.name}.")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp, final)
        except BaseException:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
            raise

    _stage(image.pixels.tobytes(), path.parent / raw_name)
    _stage(_header_text(image, raw_name).encode("utf-8"), path)
