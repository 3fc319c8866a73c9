"""Cohort statistics: agreement, Bland-Altman export, Wilcoxon signed-rank.

Conventions are fixed and documented rather than configurable:

* ``std`` is the population (1/n) standard deviation, matching the
  Bland-Altman convention behind the 95% limits of agreement
  (``bias +- 1.96 * std``).
* The Wilcoxon test drops zero differences (Wilcoxon's original rule),
  assigns mid-ranks to ties, and reports the exact two-sided p-value by full
  enumeration of sign assignments up to ``n_effective`` = 25; beyond that a
  normal approximation with tie-corrected variance and a 0.5 continuity
  correction is used.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "AgreementStats",
    "WilcoxonResult",
    "agreement",
    "bland_altman",
    "bland_altman_csv",
    "wilcoxon_signed_rank",
]

LOA_FACTOR = 1.96
"""Multiplier mapping one standard deviation onto 95% limits of agreement."""


@dataclass(frozen=True)
class AgreementStats:
    """Pearson correlation, bias, spread, and limits of agreement.

    ``corr`` is NaN when undefined (fewer than 2 points or a constant
    series); the remaining statistics are always computed.  Note that
    ``mae >= |bias|`` always holds, but ``mae`` may exceed ``std``.
    """

    corr: float
    bias: float
    std: float
    mae: float
    loa_low: float
    loa_high: float

    def __post_init__(self) -> None:
        if self.mae < 0 or self.std < 0:
            raise ValueError("std and mae must be non-negative")


@dataclass(frozen=True)
class WilcoxonResult:
    """Signed-rank statistic ``W+``, effective sample size, and p-value."""

    w_plus: float
    n_effective: int
    p_value: float
    method: str

    def __post_init__(self) -> None:
        if self.method not in ("exact", "normal-approximation"):
            raise ValueError(f"unknown method {self.method!r}")
        limit = self.n_effective * (self.n_effective + 1) / 2
        if not 0 <= self.w_plus <= limit:
            raise ValueError(f"w_plus {self.w_plus} outside [0, {limit}]")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")


def _paired_arrays(user: Sequence[float], ref: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(user, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    if u.ndim != 1 or r.ndim != 1:
        raise ValueError("inputs must be 1D sequences")
    if len(u) != len(r):
        raise ValueError(f"length mismatch: {len(u)} vs {len(r)}")
    if len(u) == 0:
        raise ValueError("inputs must be non-empty")
    return u, r


def agreement(user: Sequence[float], ref: Sequence[float]) -> AgreementStats:
    """Agreement statistics of paired measurements ``user`` vs ``ref``.

    ``corr`` is the Pearson coefficient (NaN when either series is constant
    or fewer than 2 pairs exist); ``bias`` is ``mean(user - ref)``; ``std``
    the population standard deviation of the differences; ``mae`` the mean
    absolute difference; the limits of agreement are ``bias +- 1.96 * std``.
    """
    u, r = _paired_arrays(user, ref)
    diff = u - r
    bias = float(diff.mean())
    std = float(np.sqrt(np.mean((diff - bias) ** 2)))
    mae = float(np.abs(diff).mean())

    corr = math.nan
    constant = bool((u == u[0]).all() or (r == r[0]).all())
    if len(u) >= 2 and not constant:
        du = u - u.mean()
        dr = r - r.mean()
        denom = math.sqrt(float(du @ du) * float(dr @ dr))
        if denom > 0.0:
            corr = float(du @ dr) / denom

    return AgreementStats(
        corr=corr,
        bias=bias,
        std=std,
        mae=mae,
        loa_low=bias - LOA_FACTOR * std,
        loa_high=bias + LOA_FACTOR * std,
    )


def bland_altman(
    user: Sequence[float], ref: Sequence[float]
) -> tuple[list[tuple[float, float]], AgreementStats]:
    """Bland-Altman pairs ``((u + r) / 2, u - r)`` in input order, plus stats."""
    u, r = _paired_arrays(user, ref)
    pairs = [(float(m), float(d)) for m, d in zip((u + r) / 2.0, u - r)]
    return pairs, agreement(user, ref)


def bland_altman_csv(pairs: Sequence[tuple[float, float]]) -> str:
    """CSV export of Bland-Altman pairs: header ``mean,difference``, one row
    per pair, no summary rows."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["mean", "difference"])
    for mean, difference in pairs:
        writer.writerow([repr(float(mean)), repr(float(difference))])
    return buffer.getvalue()


def _exact_two_sided_p(doubled_ranks: np.ndarray, w_plus_doubled: int) -> float:
    """Exact two-sided p over all sign assignments of the ranked differences.

    Works on integer doubled ranks (mid-ranks are multiples of 1/2), so the
    distribution of ``2 * W+`` is tabulated exactly by convolution: the count
    array after processing all ranks holds, at index k, the number of sign
    assignments with ``2 * W+ = k``.
    """
    total = int(doubled_ranks.sum())  # equals 2 * n(n+1)/2 = n(n+1), always even
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for doubled_rank in doubled_ranks:
        dr = int(doubled_rank)
        counts[dr:] += counts[:-dr].copy()

    center_doubled = total  # 4 * E[W+] = n(n+1) * ... kept as 2*k vs total/2
    # Compare |2W+ - n(n+1)/2| >= |obs - n(n+1)/2| using doubled deviations
    # (multiply both sides by 2) to stay in integers.
    observed_dev = abs(2 * w_plus_doubled - center_doubled)
    k = np.arange(total + 1)
    tail = counts[np.abs(2 * k - center_doubled) >= observed_dev].sum()
    return float(int(tail) / 2 ** len(doubled_ranks))


def wilcoxon_signed_rank(
    x: Sequence[float], y: Sequence[float], max_exact_n: int = 25
) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test of paired samples ``x`` vs ``y``.

    Zero differences are dropped (reducing ``n_effective``); tied absolute
    differences receive mid-ranks.  With ``n_effective <= max_exact_n`` the
    two-sided p-value is exact over all ``2^n`` sign assignments
    (``P(|W+ - E| >= |w_obs - E|)`` with ``E = n(n+1)/4``); otherwise a
    normal approximation with tie-corrected variance and 0.5 continuity
    correction is used.  All differences zero yields ``p = 1.0`` with
    ``n_effective = 0``.
    """
    u, r = _paired_arrays(x, y)
    diff = u - r
    diff = diff[diff != 0.0]
    n = len(diff)
    if n == 0:
        return WilcoxonResult(w_plus=0.0, n_effective=0, p_value=1.0, method="exact")

    abs_diff = np.abs(diff)
    ranks = rankdata(abs_diff, method="average")
    w_plus = float(ranks[diff > 0].sum())

    if n <= max_exact_n:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        p = _exact_two_sided_p(doubled, int(round(2.0 * w_plus)))
        return WilcoxonResult(w_plus=w_plus, n_effective=n, p_value=p, method="exact")

    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(abs_diff, return_counts=True)
    tie_term = float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts))
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    sigma = math.sqrt(variance)
    z = max(0.0, abs(w_plus - mean) - 0.5) / sigma
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return WilcoxonResult(
        w_plus=w_plus, n_effective=n, p_value=p, method="normal-approximation"
    )
