"""Synthetic ellipse phantoms for toy-scale training.

Each phantom mimics an apical annotation: an elliptical LV cavity (label 1)
inside a myocardial ring (label 2) with the left atrium (label 3) below.
The paired grayscale image renders the regions at distinct mean intensities
with a smooth illumination gradient, so a segmentation network must learn
the geometry rather than copy pixel values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import GrayImage

__all__ = ["Phantom", "make_phantom", "make_phantom_set", "CASE_NAMES"]

# Eight cases = two patients x two views x two instants, matching the
# benchmark's submission naming scheme.
CASE_NAMES = tuple(
    f"patient{p:04d}_{view}_{instant}"
    for p in (1, 2)
    for view in ("2CH", "4CH")
    for instant in ("ED", "ES")
)

_INTENSITY = {0: 28, 1: 216, 2: 110, 3: 170}


@dataclass(frozen=True)
class Phantom:
    """One image/mask training pair in engine units (uint8, mm spacing)."""

    name: str
    image: GrayImage
    mask: GrayImage


def make_phantom(
    name: str,
    *,
    size: int = 256,
    scale: float = 1.0,
    tilt: float = 0.0,
    spacing: float = 0.4,
) -> Phantom:
    """Build one phantom of ``size`` x ``size`` pixels.

    ``scale`` grows/shrinks all structures (ES frames use a smaller scale
    than ED); ``tilt`` shears the cavity axis so cases are not translates of
    each other.
    """
    if size < 32:
        raise ValueError(f"size must be >= 32, got {size}")
    if not 0.5 <= scale <= 1.3:
        raise ValueError(f"scale must be in [0.5, 1.3], got {scale}")

    zz, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cz, cx = 0.42 * size, 0.5 * size
    x = (xx - cx) - tilt * (zz - cz)
    z = zz - cz

    def ellipse(az: float, ax: float, dz: float = 0.0) -> np.ndarray:
        return ((z - dz * size) / (az * size * scale)) ** 2 + (
            x / (ax * size * scale)
        ) ** 2 <= 1.0

    labels = np.zeros((size, size), dtype=np.uint8)
    labels[ellipse(0.30, 0.20)] = 2
    labels[ellipse(0.24, 0.14)] = 1
    atrium = ellipse(0.11, 0.13, dz=0.44) & (labels == 0)
    labels[atrium] = 3

    shade = 1.0 - 0.25 * (zz / size)
    image = np.full((size, size), float(_INTENSITY[0]))
    for label, level in _INTENSITY.items():
        if label:
            image[labels == label] = float(level)
    image = np.clip(image * shade, 0, 255).astype(np.uint8)

    return Phantom(
        name=name,
        image=GrayImage(pixels=image, spacing_x=spacing, spacing_z=spacing),
        mask=GrayImage(pixels=labels, spacing_x=spacing, spacing_z=spacing),
    )


def make_phantom_set(seed: int, *, size: int = 256) -> list[Phantom]:
    """The eight-case toy cohort; deterministic for a given ``seed``."""
    rng = np.random.default_rng(seed)
    phantoms = []
    for index, name in enumerate(CASE_NAMES):
        es = name.endswith("_ES")
        base = 0.78 if es else 1.02
        scale = base + float(rng.uniform(-0.06, 0.06))
        tilt = float(rng.uniform(-0.12, 0.12))
        phantoms.append(make_phantom(name, size=size, scale=scale, tilt=tilt))
    return phantoms


def manifest_csv(phantoms: list[Phantom]) -> str:
    """A benchmark-manifest CSV covering ``phantoms`` (quality Good)."""
    lines = ["patient_id,view,instant,quality,ef_group"]
    for phantom in phantoms:
        patient_id, view, instant = phantom.name.split("_")
        lines.append(f"{patient_id},{view},{instant},Good,else")
    return "\n".join(lines) + "\n"
