"""Mask-level geometry: structure regions, morphology, and contour tracing.

Conventions
-----------
* Foreground connectivity is 4-connected; background connectivity during
  hole detection is 8-connected (the standard duality).
* Contours visit outer-boundary pixel centres (Moore neighbourhood tracing)
  and are normalized counter-clockwise, i.e. positive shoelace area in the
  (x, z) plane.
* Contour coordinates are physical millimetres: ``x = column * spacing_x``,
  ``z = row * spacing_z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .dataset_io import LabelMask
from .errors import DegenerateRegionError

__all__ = [
    "Contour",
    "StructureId",
    "keep_largest_fill_holes",
    "region_of",
    "trace_contour",
]

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class StructureId(Enum):
    """The three scoreable cardiac structures.

    The label-set mapping is fixed: the endocardial region is the LV cavity
    (label 1); the epicardial region is the area enclosed by the epicardial
    contour, i.e. cavity plus myocardium (labels 1 and 2); the left atrium is
    label 3.
    """

    LV_ENDO = "LV_endo"
    LV_EPI = "LV_epi"
    LA = "LA"

    @property
    def label_set(self) -> frozenset[int]:
        return _STRUCTURE_LABELS[self]


_STRUCTURE_LABELS = {
    StructureId.LV_ENDO: frozenset({1}),
    StructureId.LV_EPI: frozenset({1, 2}),
    StructureId.LA: frozenset({3}),
}


@dataclass(frozen=True, eq=False)
class Contour:
    """An ordered polyline of (x, z) points in millimetres.

    When ``closed`` is true the edge from the last point back to the first is
    implicit: the last stored point must differ from the first.
    """

    points: np.ndarray
    closed: bool = True

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
        if pts.shape[0] < 3:
            raise ValueError(f"a contour needs at least 3 points, got {pts.shape[0]}")
        same = np.all(pts == np.roll(pts, -1, axis=0), axis=1)
        if self.closed and same.any():
            raise ValueError("consecutive contour points must be distinct")
        if not self.closed and same[:-1].any():
            raise ValueError("consecutive contour points must be distinct")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Segment start/end arrays; closed contours include the closing edge."""
        starts = self.points if self.closed else self.points[:-1]
        ends = np.roll(self.points, -1, axis=0) if self.closed else self.points[1:]
        return starts, ends

    def signed_area(self) -> float:
        """Shoelace area; positive for counter-clockwise orientation."""
        x = self.points[:, 0]
        z = self.points[:, 1]
        return float(0.5 * np.sum(x * np.roll(z, -1) - np.roll(x, -1) * z))

    def translated(self, dx: float, dz: float) -> "Contour":
        return Contour(points=self.points + np.array([dx, dz]), closed=self.closed)


def region_of(mask: LabelMask, structure: StructureId) -> np.ndarray:
    """Binary region of ``structure``: true where the label is in its set."""
    return np.isin(mask.labels, tuple(structure.label_set))


def keep_largest_fill_holes(region: np.ndarray) -> np.ndarray:
    """Keep the largest 4-connected component and fill its holes.

    A hole is any 8-connected background component not connected to the image
    border.  Ties on component size keep the component whose first pixel in
    row-major order comes first.  An empty region maps to an empty region.
    """
    region = np.asarray(region, dtype=bool)
    if not region.any():
        return np.zeros_like(region)

    labelled, n_components = ndimage.label(region, structure=_FOUR_CONNECTED)
    if n_components > 1:
        flat = labelled.ravel()
        counts = np.bincount(flat)
        counts[0] = -1
        candidates = np.flatnonzero(counts == counts.max())
        if len(candidates) > 1:
            # Tie on size: keep the component whose first row-major pixel
            # comes first.
            values, first_index = np.unique(flat, return_index=True)
            first_of = dict(zip(values.tolist(), first_index.tolist()))
            best = int(min(candidates, key=lambda lab: first_of[lab]))
        else:
            best = int(candidates[0])
        kept = labelled == best
    else:
        kept = region.copy()

    background, n_background = ndimage.label(~kept, structure=_EIGHT_CONNECTED)
    if n_background:
        border = np.zeros(n_background + 1, dtype=bool)
        border[background[0, :]] = True
        border[background[-1, :]] = True
        border[background[:, 0]] = True
        border[background[:, -1]] = True
        border[0] = True
        holes = ~border[background]
        kept |= holes
    return kept


_MOORE_OFFSETS = (
    (-1, 0),   # N
    (-1, 1),   # NE
    (0, 1),    # E
    (1, 1),    # SE
    (1, 0),    # S
    (1, -1),   # SW
    (0, -1),   # W
    (-1, -1),  # NW
)
_OFFSET_INDEX = {offset: i for i, offset in enumerate(_MOORE_OFFSETS)}


def _moore_trace(region: np.ndarray) -> list[tuple[int, int]]:
    """Ordered outer-boundary pixels of the component holding the first
    foreground pixel (row-major scan), via Moore-neighbour tracing.

    The walk over (pixel, backtrack) states is deterministic, so the first
    repeated state delimits the full boundary circuit; stopping there is
    robust where the classic stop-at-start criterion can spin forever (the
    artificial west-of-start entry state need not lie on the circuit, e.g.
    for a 1x2 domino).  The circuit is rotated to begin at its
    topmost-leftmost pixel so the output is deterministic.
    """
    rows, cols = np.nonzero(region)
    start = (int(rows[0]), int(cols[0]))

    height, width = region.shape

    def is_fg(r: int, c: int) -> bool:
        return 0 <= r < height and 0 <= c < width and bool(region[r, c])

    state = (start, (start[0], start[1] - 1))  # west of the first pixel: background
    seen = {state: 0}
    trail = [state]
    while True:
        current, backtrack = state
        enter = _OFFSET_INDEX[(backtrack[0] - current[0], backtrack[1] - current[1])]
        state = None
        for step in range(1, 9):
            dr, dc = _MOORE_OFFSETS[(enter + step) % 8]
            candidate = (current[0] + dr, current[1] + dc)
            if is_fg(*candidate):
                prev_dr, prev_dc = _MOORE_OFFSETS[(enter + step - 1) % 8]
                state = (candidate, (current[0] + prev_dr, current[1] + prev_dc))
                break
        if state is None:
            return [start]  # isolated pixel
        if state in seen:
            pixels = [pixel for pixel, _ in trail[seen[state]:]]
            anchor = pixels.index(min(pixels))
            return pixels[anchor:] + pixels[:anchor]
        seen[state] = len(trail)
        trail.append(state)


def trace_contour(region: np.ndarray, spacing: tuple[float, float]) -> Contour:
    """Trace the closed outer boundary of a binary region at pixel centres.

    The region is expected to hold exactly one 4-connected component of at
    least 3 pixels (apply :func:`keep_largest_fill_holes` first); when several
    components are present, the one containing the first foreground pixel in
    row-major order is traced.  Coordinates are scaled by ``spacing`` and the
    orientation is normalized counter-clockwise (positive shoelace area).

    Raises
    ------
    DegenerateRegionError
        The region is empty or its traced component has fewer than 3 pixels.
    """
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise DegenerateRegionError("cannot trace a contour of an empty region")

    boundary = _moore_trace(region)
    if len(boundary) < 3:
        raise DegenerateRegionError(
            f"region component of {len(boundary)} pixel(s) is too small to trace"
        )

    spacing_x, spacing_z = spacing
    points = np.array(
        [(c * spacing_x, r * spacing_z) for r, c in boundary], dtype=np.float64
    )
    contour = Contour(points=points, closed=True)
    if contour.signed_area() < 0:
        reversed_points = np.concatenate([points[:1], points[1:][::-1]])
        contour = Contour(points=reversed_points, closed=True)
    return contour
