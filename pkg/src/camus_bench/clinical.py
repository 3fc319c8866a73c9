"""Clinical indices from biplane LV endocardial contours.

Volumes use Simpson's biplane method of discs: the long axis of each apical
view is split into ``N`` levels at the fractional positions ``(i - 0.5) / N``
(midpoint sampling, second-order accurate), the in-plane chord lengths at
those levels give the two diameters of each elliptical disc, and

    V = (pi / 4) * sum_i a_i * b_i * (L / N)

with ``a_i`` from the four-chamber view, ``b_i`` from the two-chamber view,
and ``L`` the longer of the two view axes.  Results are reported in ml.

The long axis of a contour is anchored at the base: annotation contours are
closed by a straight segment across the mitral plane, so the base midpoint is
the midpoint of the longest straight chord of the polygon (maximal run of
collinear edges), and the apex is the contour point farthest from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAxisError, DomainError
from .geometry import Contour

__all__ = [
    "BiplaneCase",
    "ClinicalScores",
    "LongAxis",
    "ejection_fraction",
    "long_axis",
    "simpson_biplane",
]


@dataclass(frozen=True)
class BiplaneCase:
    """The two orthogonal LV endocardial contours of one cardiac instant."""

    contour_2ch: Contour
    contour_4ch: Contour
    instant: str = "ED"

    def __post_init__(self) -> None:
        if not (self.contour_2ch.closed and self.contour_4ch.closed):
            raise ValueError("biplane contours must be closed")
        if self.instant not in ("ED", "ES"):
            raise ValueError(f"instant must be 'ED' or 'ES', got {self.instant!r}")


@dataclass(frozen=True)
class ClinicalScores:
    """End-diastolic/end-systolic volume (ml) and ejection fraction (%)."""

    edv: float
    esv: float
    ef: float

    def __post_init__(self) -> None:
        if not self.edv > 0:
            raise ValueError(f"edv must be positive, got {self.edv}")
        if self.esv < 0:
            raise ValueError(f"esv must be non-negative, got {self.esv}")

    @classmethod
    def from_volumes(cls, edv: float, esv: float) -> "ClinicalScores":
        return cls(edv=edv, esv=esv, ef=ejection_fraction(edv, esv))


@dataclass(frozen=True)
class LongAxis:
    """Base midpoint, apex, axis length (mm) and per-level disc diameters.

    ``degenerate_levels`` lists the 1-based levels whose perpendicular line
    failed to intersect the contour (diameter reported as 0); this is a
    warning flag, not an error.
    """

    base_mid: tuple[float, float]
    apex: tuple[float, float]
    length: float
    diameters: np.ndarray
    degenerate_levels: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not self.length > 0:
            raise ValueError("axis length must be positive")
        diameters = np.asarray(self.diameters, dtype=np.float64)
        if (diameters < 0).any():
            raise ValueError("diameters must be non-negative")
        object.__setattr__(self, "diameters", diameters)


def _longest_chord(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints of the longest straight chord of the closed polygon.

    Consecutive collinear edges (same direction) are merged into one chord,
    so a basal closing segment that the tracer split into several collinear
    steps still counts as a single straight chord.
    """
    n = len(points)
    deltas = np.roll(points, -1, axis=0) - points

    def collinear(i: int, j: int) -> bool:
        u, v = deltas[i], deltas[j]
        cross = u[0] * v[1] - u[1] * v[0]
        dot = u[0] * v[0] + u[1] * v[1]
        scale = math.hypot(*u) * math.hypot(*v)
        return abs(cross) <= 1e-9 * scale and dot > 0.0

    # A vertex i is a corner when edge (i-1 -> i) and edge (i -> i+1) are not
    # one straight continuation.
    corners = [i for i in range(n) if not collinear((i - 1) % n, i)]
    if len(corners) < 2:
        raise DegenerateAxisError("contour is a single straight run; no usable chord")

    best_len = -1.0
    best: tuple[np.ndarray, np.ndarray] | None = None
    for idx, start in enumerate(corners):
        end = corners[(idx + 1) % len(corners)]
        chord = points[end] - points[start]
        length = math.hypot(chord[0], chord[1])
        if length > best_len + 1e-12 * max(1.0, best_len):
            best_len = length
            best = (points[start], points[end])
    assert best is not None
    return best


def _chord_lengths(
    points: np.ndarray,
    base_mid: np.ndarray,
    axis_dir: np.ndarray,
    levels: np.ndarray,
) -> tuple[np.ndarray, list[int]]:
    """Total in-region chord length where each level line crosses the polygon.

    ``levels`` are signed distances along ``axis_dir`` from ``base_mid``.  A
    crossing of edge (p, q) is counted on the half-open span (min f, max f]
    of the edge's axial extent, which handles vertices that land exactly on a
    level line without double counting.  Crossings are paired even-odd along
    the perpendicular direction; levels with no crossing report 0 and are
    flagged.
    """
    perp = np.array([-axis_dir[1], axis_dir[0]])
    f = (points - base_mid) @ axis_dir
    g = (points - base_mid) @ perp
    f_next = np.roll(f, -1)
    g_next = np.roll(g, -1)

    if len(levels) == 0:
        return np.zeros(0), []
    step = levels[1] - levels[0] if len(levels) > 1 else max(abs(levels[0]), 1.0)

    level_idx: list[np.ndarray] = []
    crossing_pos: list[np.ndarray] = []
    for fa, fb, ga, gb in zip(f, f_next, g, g_next):
        lo, hi = (fa, fb) if fa <= fb else (fb, fa)
        if hi <= levels[0] - step or lo > levels[-1]:
            continue
        first = max(0, int(math.floor((lo - levels[0]) / step)) - 1)
        last = min(len(levels) - 1, int(math.ceil((hi - levels[0]) / step)) + 1)
        candidates = np.arange(first, last + 1)
        t = levels[candidates]
        hit = (t > lo) & (t <= hi)
        if not hit.any():
            continue
        t = t[hit]
        alpha = (t - fa) / (fb - fa)
        level_idx.append(candidates[hit])
        crossing_pos.append(ga + alpha * (gb - ga))

    diameters = np.zeros(len(levels))
    degenerate: list[int] = []
    if level_idx:
        idx = np.concatenate(level_idx)
        pos = np.concatenate(crossing_pos)
        order = np.lexsort((pos, idx))
        idx = idx[order]
        pos = pos[order]
        boundaries = np.flatnonzero(np.diff(idx)) + 1
        for group_idx, group_pos in zip(
            np.split(idx, boundaries), np.split(pos, boundaries)
        ):
            level = int(group_idx[0])
            pairs = len(group_pos) // 2
            spans = group_pos[1 : 2 * pairs : 2] - group_pos[0 : 2 * pairs : 2]
            diameters[level] = float(spans.sum())
    for level in range(len(levels)):
        if diameters[level] == 0.0:
            degenerate.append(level + 1)
    return diameters, degenerate


def long_axis(contour: Contour, discs: int = 20) -> LongAxis:
    """Extract the LV long axis and the ``discs`` perpendicular diameters.

    The base midpoint is the midpoint of the longest straight chord of the
    closed contour (the segment inserted when the open annotation is closed
    across the mitral plane); the apex is the contour point at maximum
    distance from it.  Diameters are measured on lines perpendicular to the
    axis at the fractional levels ``(i - 0.5) / N`` of the axis length.

    Raises
    ------
    DegenerateAxisError
        The contour has no usable chord or the axis length collapses.
    """
    if not contour.closed:
        raise ValueError("long_axis requires a closed contour")
    if discs < 1:
        raise ValueError(f"discs must be >= 1, got {discs}")

    points = contour.points
    chord_a, chord_b = _longest_chord(points)
    base_mid = 0.5 * (chord_a + chord_b)

    offsets = points - base_mid
    distances = np.hypot(offsets[:, 0], offsets[:, 1])
    apex_idx = int(np.argmax(distances))
    length = float(distances[apex_idx])
    if length <= 0.0:
        raise DegenerateAxisError("contour collapses onto its base midpoint")
    apex = points[apex_idx]
    axis_dir = (apex - base_mid) / length

    fractions = (np.arange(1, discs + 1) - 0.5) / discs
    levels = fractions * length
    diameters, degenerate = _chord_lengths(points, base_mid, axis_dir, levels)
    return LongAxis(
        base_mid=(float(base_mid[0]), float(base_mid[1])),
        apex=(float(apex[0]), float(apex[1])),
        length=length,
        diameters=diameters,
        degenerate_levels=tuple(degenerate),
    )


def simpson_biplane(case: BiplaneCase, discs: int = 20) -> float:
    """LV volume in ml by Simpson's biplane method of discs.

    Raises
    ------
    DegenerateAxisError
        Axis extraction fails on either view.
    """
    axis_4ch = long_axis(case.contour_4ch, discs)
    axis_2ch = long_axis(case.contour_2ch, discs)
    length = max(axis_4ch.length, axis_2ch.length)
    volume_mm3 = (math.pi / 4.0) * float(
        np.sum(axis_4ch.diameters * axis_2ch.diameters)
    ) * (length / discs)
    return volume_mm3 / 1000.0


def ejection_fraction(edv: float, esv: float) -> float:
    """Ejection fraction ``100 * (EDV - ESV) / EDV`` in percent.

    Raises
    ------
    DomainError
        ``edv`` is not positive.
    """
    if not edv > 0:
        raise DomainError(f"edv must be positive, got {edv}")
    # Divide before scaling so the result cannot exceed 100 by rounding.
    return 100.0 * ((edv - esv) / edv)
