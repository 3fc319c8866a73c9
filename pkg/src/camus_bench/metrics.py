"""Geometric agreement metrics between predicted and reference structures.

Dice is computed on pixel regions; the mean absolute surface distance (d_m)
and Hausdorff distance (d_H) are computed on traced contours in millimetres.
Distances are point-to-polyline (nearest point on any segment, not nearest
vertex), which removes sampling-density bias, and are symmetrized:

* ``d_m`` is the average of the two directed mean distances;
* ``d_H`` is the larger of the two directed maximum distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset_io import LabelMask
from .errors import MissingReferenceError, ShapeError
from .geometry import Contour, StructureId, keep_largest_fill_holes, region_of, trace_contour

__all__ = [
    "GeometricScores",
    "dice",
    "directed_avg_distance",
    "hausdorff",
    "mean_absolute_distance",
    "score_case",
]


@dataclass(frozen=True)
class GeometricScores:
    """Per-case agreement scores: Dice, d_m (mm), d_H (mm).

    A failed comparison (empty predicted region) carries ``dice = 0`` with
    infinite distances; ``failed`` flags it so reports can exclude the case
    from distance aggregates instead of averaging a fake number.
    """

    dice: float
    d_m: float
    d_H: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.dice <= 1.0:
            raise ValueError(f"dice must be in [0, 1], got {self.dice}")
        if self.d_m < 0 or self.d_H < 0:
            raise ValueError("distances must be non-negative")
        # Tolerance guards against last-ulp rounding in the mean.
        if self.d_m > self.d_H + 1e-9 * max(1.0, self.d_H):
            raise ValueError(f"d_m ({self.d_m}) cannot exceed d_H ({self.d_H})")

    @property
    def failed(self) -> bool:
        return not (math.isfinite(self.d_m) and math.isfinite(self.d_H))


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice overlap ``2|a n b| / (|a| + |b|)`` between two binary masks.

    Two empty masks agree vacuously (1.0).

    Raises
    ------
    ShapeError
        The masks differ in shape.
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    intersection = int(np.logical_and(a, b).sum())
    return 2.0 * intersection / total


_CHUNK = 512  # vertices per block when forming the (points x segments) table


def _distances_to_polyline(points: np.ndarray, polyline: Contour) -> np.ndarray:
    """Euclidean distance from each point to the nearest point on ``polyline``."""
    starts, ends = polyline.edges()
    deltas = ends - starts
    lengths_sq = np.einsum("ij,ij->i", deltas, deltas)

    out = np.empty(len(points))
    for lo in range(0, len(points), _CHUNK):
        block = points[lo : lo + _CHUNK]
        rel = block[:, None, :] - starts[None, :, :]
        t = np.einsum("psj,sj->ps", rel, deltas) / lengths_sq
        np.clip(t, 0.0, 1.0, out=t)
        nearest = rel - t[:, :, None] * deltas[None, :, :]
        dist_sq = np.einsum("psj,psj->ps", nearest, nearest)
        out[lo : lo + _CHUNK] = np.sqrt(dist_sq.min(axis=1))
    return out


def directed_avg_distance(a: Contour, b: Contour) -> float:
    """Mean over vertices of ``a`` of the distance to the polyline ``b``, mm."""
    return float(_distances_to_polyline(a.points, b).mean())


def mean_absolute_distance(a: Contour, b: Contour) -> float:
    """Symmetric mean absolute surface distance d_m in mm."""
    return 0.5 * (directed_avg_distance(a, b) + directed_avg_distance(b, a))


def hausdorff(a: Contour, b: Contour) -> float:
    """Hausdorff distance d_H in mm: the largest nearest-point distance."""
    forward = float(_distances_to_polyline(a.points, b).max())
    backward = float(_distances_to_polyline(b.points, a).max())
    return max(forward, backward)


def score_case(
    pred: LabelMask,
    ref: LabelMask,
    structure: StructureId,
    postprocess: bool = True,
) -> GeometricScores:
    """Score one predicted mask against its reference for one structure.

    The prediction region is post-processed (largest component + hole fill)
    unless ``postprocess`` is false; the reference is scored as-is.  Dice is
    computed on the regions, d_m/d_H on their traced contours.

    Returns
    -------
    GeometricScores
        ``(0.0, inf, inf)`` when the predicted region is empty (a failed
        case, surfaced rather than averaged).

    Raises
    ------
    ShapeError
        Dimensions or spacing differ between the two masks.
    MissingReferenceError
        The reference region is empty for this structure.
    """
    if pred.labels.shape != ref.labels.shape:
        raise ShapeError(
            f"prediction {pred.labels.shape} and reference {ref.labels.shape} differ in shape"
        )
    if pred.spacing != ref.spacing:
        raise ShapeError(
            f"prediction spacing {pred.spacing} and reference spacing {ref.spacing} differ"
        )

    ref_region = region_of(ref, structure)
    if not ref_region.any():
        raise MissingReferenceError(f"reference region for {structure.value} is empty")

    pred_region = region_of(pred, structure)
    if postprocess:
        pred_region = keep_largest_fill_holes(pred_region)

    overlap = dice(pred_region, ref_region)
    if not pred_region.any():
        return GeometricScores(dice=0.0, d_m=math.inf, d_H=math.inf)

    pred_contour = trace_contour(pred_region, ref.spacing)
    ref_contour = trace_contour(ref_region, ref.spacing)
    return GeometricScores(
        dice=overlap,
        d_m=mean_absolute_distance(pred_contour, ref_contour),
        d_H=hausdorff(pred_contour, ref_contour),
    )
