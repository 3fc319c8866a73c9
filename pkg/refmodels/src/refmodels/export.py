"""Run a model over a directory of images and export label masks."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .errors import FormatError
from .formats import GrayImage, atomic_write_image, read_image
from .preprocess import INPUT_SIZE, preprocess

__all__ = ["predict_case", "predict_and_export"]


def _nearest_indices(native: int, grid: int) -> np.ndarray:
    """Pixel-center nearest-neighbour index map from ``native`` positions
    onto a ``grid``-sized axis."""
    centers = (np.arange(native) + 0.5) * (grid / native)
    return np.minimum(centers.astype(np.int64), grid - 1)


def predict_case(model: torch.nn.Module, image: GrayImage) -> GrayImage:
    """Segment one image: resize to the network input size, take the argmax
    label map, and resize it back to the image's native geometry (nearest
    neighbour, so the output stays a clean label image).  The returned mask
    inherits the input's pixel spacing."""
    model.eval()
    with torch.inference_mode():
        probabilities = model(preprocess(image.pixels))
    labels = probabilities[0].argmax(dim=0).numpy().astype(np.uint8)
    rows = _nearest_indices(image.height, INPUT_SIZE)
    cols = _nearest_indices(image.width, INPUT_SIZE)
    mask = labels[np.ix_(rows, cols)]
    return GrayImage(pixels=mask, spacing_x=image.spacing_x, spacing_z=image.spacing_z)


def predict_and_export(
    model: torch.nn.Module, images_dir: Path | str, out_dir: Path | str
) -> list[Path]:
    """Segment every ``*.mhd`` image under ``images_dir`` and write one mask
    per image to ``out_dir`` under the same file name.  Images are processed
    in sorted name order; each mask is written atomically.  Returns the
    written header paths."""
    images_dir = Path(images_dir)
    out_dir = Path(out_dir)
    headers = sorted(images_dir.glob("*.mhd"))
    if not headers:
        raise FormatError(f"no .mhd images found in {images_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for header in headers:
        mask = predict_case(model, read_image(header))
        destination = out_dir / header.name
        atomic_write_image(mask, destination)
        written.append(destination)
    return written
