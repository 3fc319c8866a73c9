"""Input preparation: resize to the network grid, then density-normalize."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

__all__ = ["INPUT_SIZE", "preprocess"]

INPUT_SIZE = 256
_VARIANCE_FLOOR = 1e-12


def preprocess(pixels: np.ndarray, size: int = INPUT_SIZE) -> torch.Tensor:
    """Turn a 2D grayscale image into a ``(1, 1, size, size)`` network input.

    The image is resampled bilinearly to ``size`` x ``size`` (skipped when it
    already has that shape) and normalized to zero mean and unit variance.
    A constant image has no density information; the variance floor maps it
    to all zeros instead of dividing by zero.
    """
    arr = np.asarray(pixels)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"expected a non-empty 2D image, got shape {arr.shape}")
    if size <= 0:
        raise ValueError(f"size must be positive, got {size}")

    x = torch.from_numpy(arr.astype(np.float64))[None, None]
    if x.shape[-2:] != (size, size):
        x = F.interpolate(x, size=(size, size), mode="bilinear", align_corners=False)

    mean = x.mean()
    variance = x.var(unbiased=False)
    if float(variance) <= _VARIANCE_FLOOR:
        return torch.zeros_like(x, dtype=torch.float32)
    return ((x - mean) / torch.sqrt(variance)).to(torch.float32)
