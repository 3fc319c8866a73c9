"""Benchmark orchestration: folds, batch scoring, outliers, reports.

A submission is a directory of mask files named
``<patient_id>_<view>_<instant>.mhd`` (plus the ``.raw`` payloads), one mask
per case containing all structure labels.  References live in a second
directory with the same layout.  ``evaluate_submission`` is a pure function
of the file bytes and its options: re-running it (with any worker count)
yields a byte-identical report.
"""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._version import __version__
from .clinical import BiplaneCase, ejection_fraction, simpson_biplane
from .dataset_io import (
    EF_GROUPS,
    INSTANTS,
    QUALITIES,
    VIEWS,
    PatientCase,
    load_manifest,
    read_mask,
)
from .errors import (
    CamusBenchError,
    DegenerateAxisError,
    DegenerateRegionError,
    DomainError,
    ManifestError,
    MissingReferenceError,
)
from .geometry import (
    Contour,
    StructureId,
    keep_largest_fill_holes,
    region_of,
    trace_contour,
)
from .metrics import GeometricScores, dice as dice_overlap, hausdorff, mean_absolute_distance
from .stats import agreement, wilcoxon_signed_rank

__all__ = [
    "FoldAssignment",
    "MethodReport",
    "OutlierRule",
    "cases_from_csv",
    "cases_to_csv",
    "classify_outlier",
    "compare_methods",
    "evaluate_submission",
    "make_folds",
    "render_report",
    "report_from_csv",
    "report_from_json",
]

STRUCTURES = (StructureId.LV_ENDO, StructureId.LV_EPI, StructureId.LA)


@dataclass(frozen=True)
class OutlierRule:
    """Distance thresholds (mm) separating acceptable results from outliers,
    set at the inter-observer variability: a case is an outlier when its
    distance exceeds (strictly) the threshold for its instant."""

    dm_max_ed: float = 3.5
    dm_max_es: float = 4.0
    dh_max_ed: float = 8.2
    dh_max_es: float = 8.8

    def __post_init__(self) -> None:
        for name in ("dm_max_ed", "dm_max_es", "dh_max_ed", "dh_max_es"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def classify_outlier(
    scores: GeometricScores,
    instant: str,
    rule: OutlierRule | None = None,
    combine: str = "or",
) -> bool:
    """True when ``scores`` breach the outlier rule for ``instant``.

    ``combine`` selects how the d_m and d_H criteria are joined: ``"or"``
    (default; either threshold exceeded) or ``"and"`` (both exceeded).
    Thresholds are strict: a score exactly at the threshold is not an
    outlier.
    """
    if rule is None:
        rule = OutlierRule()
    if instant not in INSTANTS:
        raise ValueError(f"instant must be one of {INSTANTS}, got {instant!r}")
    if combine not in ("or", "and"):
        raise ValueError(f"combine must be 'or' or 'and', got {combine!r}")
    if not (math.isfinite(scores.d_m) and math.isfinite(scores.d_H)):
        raise ValueError("outlier classification requires finite scores")
    dm_limit = rule.dm_max_ed if instant == "ED" else rule.dm_max_es
    dh_limit = rule.dh_max_ed if instant == "ED" else rule.dh_max_es
    dm_out = scores.d_m > dm_limit
    dh_out = scores.d_H > dh_limit
    return (dm_out or dh_out) if combine == "or" else (dm_out and dh_out)


@dataclass
class FoldAssignment:
    """Mapping of patient_id to fold index in ``1..k``."""

    assignments: dict[str, int]
    k: int

    def fold_of(self, patient_id: str) -> int:
        return self.assignments[patient_id]

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for fold in self.assignments.values():
            sizes[fold - 1] += 1
        return sizes

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["patient_id", "fold"])
        for patient_id in sorted(self.assignments):
            writer.writerow([patient_id, self.assignments[patient_id]])
        return buffer.getvalue()


def _patient_attributes(cases: Iterable[PatientCase]) -> dict[str, tuple[str, str]]:
    attributes: dict[str, tuple[str, str]] = {}
    for case in cases:
        tags = (case.quality, case.ef_group)
        existing = attributes.get(case.patient_id)
        if existing is not None and existing != tags:
            raise ManifestError(
                f"patient {case.patient_id} has inconsistent quality/ef_group tags"
            )
        attributes[case.patient_id] = tags
    return attributes


def _repair_ef_balance(
    per_fold: list[dict[str, list[str]]],
    attributes: Mapping[str, tuple[str, str]],
    k: int,
) -> None:
    """Swap same-quality patients between folds until every fold's count of
    every EF group lies in [floor(n_e/k), ceil(n_e/k)] (when reachable).

    ``per_fold[f]`` maps ``"quality|ef_group"`` to the patients of that cell
    in fold ``f``.  Swapping within a quality keeps the (already balanced)
    per-fold quality counts intact; each applied swap strictly reduces the
    total out-of-bounds deviation, so the loop terminates.
    """
    totals = {e: 0 for e in EF_GROUPS}
    for _, ef_group in attributes.values():
        totals[ef_group] += 1
    low = {e: totals[e] // k for e in EF_GROUPS}
    high = {e: -(-totals[e] // k) for e in EF_GROUPS}

    def ef_count(fold: int, ef_group: str) -> int:
        return sum(
            len(members)
            for cell, members in per_fold[fold].items()
            if cell.endswith("|" + ef_group)
        )

    def deviation() -> int:
        return sum(
            max(0, ef_count(f, e) - high[e]) + max(0, low[e] - ef_count(f, e))
            for f in range(k)
            for e in EF_GROUPS
        )

    current = deviation()
    while current > 0:
        applied = False
        for ef_over in EF_GROUPS:
            for fold_over in range(k):
                if ef_count(fold_over, ef_over) <= high[ef_over]:
                    continue
                for fold_under in range(k):
                    if ef_count(fold_under, ef_over) >= high[ef_over]:
                        continue
                    for quality in QUALITIES:
                        give_cell = quality + "|" + ef_over
                        donors = per_fold[fold_over].get(give_cell, [])
                        if not donors:
                            continue
                        for ef_back in EF_GROUPS:
                            if ef_back == ef_over:
                                continue
                            take_cell = quality + "|" + ef_back
                            returners = per_fold[fold_under].get(take_cell, [])
                            if not returners:
                                continue
                            donor = donors[0]
                            returner = returners[0]
                            donors.remove(donor)
                            returners.remove(returner)
                            per_fold[fold_under].setdefault(give_cell, []).append(donor)
                            per_fold[fold_over].setdefault(take_cell, []).append(returner)
                            new = deviation()
                            if new < current:
                                current = new
                                applied = True
                            else:  # revert: the swap did not help
                                per_fold[fold_under][give_cell].remove(donor)
                                per_fold[fold_over][take_cell].remove(returner)
                                donors.append(donor)
                                returners.append(returner)
                                donors.sort()
                                returners.sort()
                            if applied:
                                break
                        if applied:
                            break
                    if applied:
                        break
                if applied:
                    break
            if applied:
                break
        if not applied:
            break


def make_folds(cases: Sequence[PatientCase], k: int = 10, seed: int = 0) -> FoldAssignment:
    """Stratified fold assignment of the patients appearing in ``cases``.

    Patients are grouped by (quality, ef_group) cell, shuffled within each
    cell by a seeded RNG, and dealt round-robin across folds with a single
    continuing pointer.  Cells are visited quality-major, which keeps each
    fold's quality counts within one patient of the ideal share; a
    deterministic same-quality swap pass then balances the EF-group counts.
    The result is deterministic for a given seed.

    Raises
    ------
    ValueError
        ``k`` exceeds the number of distinct patients, or ``k < 1``.
    """
    attributes = _patient_attributes(cases)
    n = len(attributes)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of patients ({n})")

    rng = Random(seed)
    per_fold: list[dict[str, list[str]]] = [{} for _ in range(k)]
    pointer = 0
    for quality in QUALITIES:
        for ef_group in EF_GROUPS:
            members = sorted(
                pid for pid, tags in attributes.items() if tags == (quality, ef_group)
            )
            rng.shuffle(members)
            cell = quality + "|" + ef_group
            for pid in members:
                per_fold[pointer % k].setdefault(cell, []).append(pid)
                pointer += 1

    _repair_ef_balance(per_fold, attributes, k)

    assignments: dict[str, int] = {}
    for fold_index, cells in enumerate(per_fold, start=1):
        for members in cells.values():
            for pid in members:
                assignments[pid] = fold_index
    return FoldAssignment(assignments=assignments, k=k)


# ---------------------------------------------------------------------------
# Submission evaluation
# ---------------------------------------------------------------------------

_CASE_FIELDS = ("patient_id", "view", "instant", "structure", "dice", "d_m", "d_H", "outlier")


def _case_file(directory: Path, case: PatientCase) -> Path:
    return directory / f"{case.patient_id}_{case.view}_{case.instant}.mhd"


def _score_case_task(task: tuple[str, str, str, str, str, bool]) -> dict:
    """Score one case (all structures); runs in worker processes.

    Returns a plain picklable dict: per-structure status and scores, plus
    the LV endocardial contours needed later for the clinical indices.
    """
    pred_path, ref_path, patient_id, view, instant, postprocess = task
    result: dict = {
        "patient_id": patient_id,
        "view": view,
        "instant": instant,
        "structures": {},
        "pred_endo": None,
        "ref_endo": None,
    }

    ref = read_mask(ref_path)
    pred = read_mask(pred_path)
    if pred.labels.shape != ref.labels.shape or pred.spacing != ref.spacing:
        raise CamusBenchError(
            f"{pred_path}: geometry differs from reference "
            f"(shape {pred.labels.shape} vs {ref.labels.shape}, "
            f"spacing {pred.spacing} vs {ref.spacing})"
        )

    for structure in STRUCTURES:
        ref_region = region_of(ref, structure)
        if not ref_region.any():
            result["structures"][structure.value] = {"status": "empty-reference-region"}
            continue
        pred_region = region_of(pred, structure)
        if postprocess:
            pred_region = keep_largest_fill_holes(pred_region)
        overlap = dice_overlap(pred_region, ref_region)
        if not pred_region.any():
            result["structures"][structure.value] = {
                "status": "empty-prediction-region",
                "dice": overlap,
                "d_m": math.inf,
                "d_H": math.inf,
            }
            continue
        try:
            pred_contour = trace_contour(pred_region, ref.spacing)
            ref_contour = trace_contour(ref_region, ref.spacing)
        except DegenerateRegionError:
            result["structures"][structure.value] = {"status": "degenerate-region"}
            continue
        result["structures"][structure.value] = {
            "status": "ok",
            "dice": overlap,
            "d_m": mean_absolute_distance(pred_contour, ref_contour),
            "d_H": hausdorff(pred_contour, ref_contour),
        }
        if structure is StructureId.LV_ENDO:
            result["pred_endo"] = pred_contour.points.tolist()
            result["ref_endo"] = ref_contour.points.tolist()
    return result


def _normalize_filter(values, table: Mapping[str, str], name: str) -> tuple[str, ...] | None:
    if values is None:
        return None
    out = []
    for value in values:
        canonical = table.get(str(value).strip().lower())
        if canonical is None:
            raise ValueError(f"unknown {name} filter token {value!r}")
        out.append(canonical)
    return tuple(dict.fromkeys(out))


def evaluate_submission(
    pred_dir: str | Path,
    ref_dir: str | Path,
    manifest: str | Path | Sequence[PatientCase],
    *,
    qualities: Sequence[str] | None = None,
    folds: Sequence[int] | None = None,
    views: Sequence[str] | None = None,
    instants: Sequence[str] | None = None,
    postprocess: bool = True,
    outlier_rule: OutlierRule | None = None,
    outlier_combine: str = "or",
    workers: int = 1,
) -> "MethodReport":
    """Score every filtered manifest case of ``pred_dir`` against ``ref_dir``.

    Predictions are post-processed (largest component + hole filling) before
    scoring unless ``postprocess`` is false; references are scored as-is.
    Geometric scores cover LV_endo/LV_epi/LA per case; clinical indices
    (EDV/ESV/EF, Simpson biplane) are derived per patient from the four LV
    endocardial contours (2CH/4CH x ED/ES) whenever all four cases were
    scored.  Aggregation runs in sorted case order regardless of ``workers``,
    so reports are byte-deterministic.

    Raises
    ------
    MissingReferenceError
        A reference mask file is absent for a selected case.
    """
    pred_dir = Path(pred_dir)
    ref_dir = Path(ref_dir)
    if outlier_rule is None:
        outlier_rule = OutlierRule()
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")

    if isinstance(manifest, (str, Path)):
        cases = load_manifest(manifest)
    else:
        cases = list(manifest)

    quality_filter = _normalize_filter(qualities, {q.lower(): q for q in QUALITIES}, "quality")
    view_filter = _normalize_filter(views, {v.lower(): v for v in VIEWS}, "view")
    instant_filter = _normalize_filter(instants, {i.lower(): i for i in INSTANTS}, "instant")
    fold_filter = tuple(sorted({int(f) for f in folds})) if folds is not None else None

    selected: list[PatientCase] = []
    for case in cases:
        if quality_filter is not None and case.quality not in quality_filter:
            continue
        if view_filter is not None and case.view not in view_filter:
            continue
        if instant_filter is not None and case.instant not in instant_filter:
            continue
        if fold_filter is not None:
            if case.fold is None:
                raise ManifestError(
                    f"case {case.patient_id},{case.view},{case.instant} has no fold "
                    "but a fold filter was requested"
                )
            if case.fold not in fold_filter:
                continue
        selected.append(case)
    selected.sort(key=lambda c: c.key)

    tasks = []
    failures: list[dict] = []
    runnable: list[PatientCase] = []
    for case in selected:
        ref_path = _case_file(ref_dir, case)
        if not ref_path.exists():
            raise MissingReferenceError(f"reference mask missing: {ref_path}")
        pred_path = _case_file(pred_dir, case)
        if not pred_path.exists():
            failures.append(
                {
                    "patient_id": case.patient_id,
                    "view": case.view,
                    "instant": case.instant,
                    "structure": None,
                    "reason": "missing-prediction",
                }
            )
            continue
        runnable.append(case)
        tasks.append(
            (str(pred_path), str(ref_path), case.patient_id, case.view, case.instant, postprocess)
        )

    if workers > 1 and tasks:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            results = pool.map(_score_case_task, tasks)
    else:
        results = [_score_case_task(task) for task in tasks]

    case_rows: list[dict] = []
    endo_contours: dict[tuple[str, str, str], tuple[list, list]] = {}
    flagged = 0
    scored = 0
    for case, result in zip(runnable, results):
        for structure in STRUCTURES:
            entry = result["structures"][structure.value]
            status = entry["status"]
            if status == "ok":
                scores = GeometricScores(dice=entry["dice"], d_m=entry["d_m"], d_H=entry["d_H"])
                is_outlier = classify_outlier(
                    scores, case.instant, outlier_rule, outlier_combine
                )
                scored += 1
                flagged += int(is_outlier)
                case_rows.append(
                    {
                        "patient_id": case.patient_id,
                        "view": case.view,
                        "instant": case.instant,
                        "structure": structure.value,
                        "dice": scores.dice,
                        "d_m": scores.d_m,
                        "d_H": scores.d_H,
                        "outlier": is_outlier,
                    }
                )
            else:
                failures.append(
                    {
                        "patient_id": case.patient_id,
                        "view": case.view,
                        "instant": case.instant,
                        "structure": structure.value,
                        "reason": status,
                    }
                )
                if status == "empty-prediction-region":
                    case_rows.append(
                        {
                            "patient_id": case.patient_id,
                            "view": case.view,
                            "instant": case.instant,
                            "structure": structure.value,
                            "dice": entry["dice"],
                            "d_m": math.inf,
                            "d_H": math.inf,
                            "outlier": False,
                        }
                    )
        if result["pred_endo"] is not None and result["ref_endo"] is not None:
            endo_contours[case.key] = (result["pred_endo"], result["ref_endo"])

    geometric: dict[str, dict] = {}
    for structure in STRUCTURES:
        for instant in INSTANTS:
            rows = [
                row
                for row in case_rows
                if row["structure"] == structure.value
                and row["instant"] == instant
                and math.isfinite(row["d_m"])
            ]
            key = f"{structure.value}|{instant}"
            if rows:
                dice_values = np.array([row["dice"] for row in rows])
                dm_values = np.array([row["d_m"] for row in rows])
                dh_values = np.array([row["d_H"] for row in rows])
                geometric[key] = {
                    "count": len(rows),
                    "dice_mean": float(dice_values.mean()),
                    "dice_std": float(dice_values.std()),
                    "dm_mean": float(dm_values.mean()),
                    "dm_std": float(dm_values.std()),
                    "dh_mean": float(dh_values.mean()),
                    "dh_std": float(dh_values.std()),
                }
            else:
                geometric[key] = {"count": 0}

    clinical_cases: list[dict] = []
    patient_ids = sorted({case.patient_id for case in runnable})
    for pid in patient_ids:
        needed = [(pid, view, instant) for view in VIEWS for instant in INSTANTS]
        if not all(key in endo_contours for key in needed):
            continue
        try:
            volumes = {}
            for who in ("user", "ref"):
                index = 0 if who == "user" else 1
                contours = {
                    (view, instant): Contour(
                        points=np.array(endo_contours[(pid, view, instant)][index])
                    )
                    for view in VIEWS
                    for instant in INSTANTS
                }
                edv = simpson_biplane(
                    BiplaneCase(
                        contour_2ch=contours[("2CH", "ED")],
                        contour_4ch=contours[("4CH", "ED")],
                        instant="ED",
                    )
                )
                esv = simpson_biplane(
                    BiplaneCase(
                        contour_2ch=contours[("2CH", "ES")],
                        contour_4ch=contours[("4CH", "ES")],
                        instant="ES",
                    )
                )
                volumes[who] = (edv, esv, ejection_fraction(edv, esv))
        except (DegenerateAxisError, DomainError) as exc:
            failures.append(
                {
                    "patient_id": pid,
                    "view": None,
                    "instant": None,
                    "structure": "clinical",
                    "reason": f"clinical-failed: {exc}",
                }
            )
            continue
        clinical_cases.append(
            {
                "patient_id": pid,
                "edv_user": volumes["user"][0],
                "edv_ref": volumes["ref"][0],
                "esv_user": volumes["user"][1],
                "esv_ref": volumes["ref"][1],
                "ef_user": volumes["user"][2],
                "ef_ref": volumes["ref"][2],
            }
        )

    clinical: dict[str, dict] = {}
    for name, user_key, ref_key in (
        ("EDV", "edv_user", "edv_ref"),
        ("ESV", "esv_user", "esv_ref"),
        ("EF", "ef_user", "ef_ref"),
    ):
        if clinical_cases:
            user = [row[user_key] for row in clinical_cases]
            ref = [row[ref_key] for row in clinical_cases]
            stats = agreement(user, ref)
            clinical[name] = {
                "count": len(user),
                "corr": None if math.isnan(stats.corr) else stats.corr,
                "bias": stats.bias,
                "std": stats.std,
                "mae": stats.mae,
                "loa_low": stats.loa_low,
                "loa_high": stats.loa_high,
            }
        else:
            clinical[name] = {"count": 0}

    report = MethodReport(
        engine_version=__version__,
        options={
            "postprocess": postprocess,
            "outlier_combine": outlier_combine,
            "outlier_rule": {
                "dm_max_ed": outlier_rule.dm_max_ed,
                "dm_max_es": outlier_rule.dm_max_es,
                "dh_max_ed": outlier_rule.dh_max_ed,
                "dh_max_es": outlier_rule.dh_max_es,
            },
        },
        cohort={
            "manifest_cases": len(cases),
            "selected_cases": len(selected),
            "scored_cases": len(runnable),
            "patients": len({case.patient_id for case in selected}),
            "filters": {
                "qualities": list(quality_filter) if quality_filter is not None else None,
                "folds": list(fold_filter) if fold_filter is not None else None,
                "views": list(view_filter) if view_filter is not None else None,
                "instants": list(instant_filter) if instant_filter is not None else None,
            },
        },
        geometric=geometric,
        clinical=clinical,
        outliers={
            "flagged": flagged,
            "scored": scored,
            "rate": (flagged / scored) if scored else 0.0,
        },
        failures=failures,
        cases=case_rows,
        clinical_cases=clinical_cases,
    )
    return report


@dataclass
class MethodReport:
    """Full scoring report: aggregates, outliers, failures, per-case scores."""

    engine_version: str
    options: dict
    cohort: dict
    geometric: dict
    clinical: dict
    outliers: dict
    failures: list = field(default_factory=list)
    cases: list = field(default_factory=list)
    clinical_cases: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "engine_version": self.engine_version,
            "options": self.options,
            "cohort": self.cohort,
            "geometric": self.geometric,
            "clinical": self.clinical,
            "outliers": self.outliers,
            "failures": self.failures,
            "cases": self.cases,
            "clinical_cases": self.clinical_cases,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MethodReport":
        return cls(
            engine_version=data["engine_version"],
            options=data["options"],
            cohort=data["cohort"],
            geometric=data["geometric"],
            clinical=data["clinical"],
            outliers=data["outliers"],
            failures=list(data.get("failures", [])),
            cases=list(data.get("cases", [])),
            clinical_cases=list(data.get("clinical_cases", [])),
        )


# ---------------------------------------------------------------------------
# Method comparison
# ---------------------------------------------------------------------------

_METRIC_KEYS = {"dice": "dice", "dm": "d_m", "dh": "d_H"}


def compare_methods(
    report_a_cases: Sequence[Mapping],
    report_b_cases: Sequence[Mapping],
    metric: str = "dm",
    *,
    structures: Sequence[str] | None = None,
    views: Sequence[str] | None = None,
    instants: Sequence[str] | None = None,
):
    """Wilcoxon signed-rank comparison of two methods' per-case scores.

    Rows are matched by ``(patient_id, view, instant, structure)``; the two
    case sets must contain exactly the same keys.  By default every matched
    pair is pooled into a single test; the optional filters restrict the
    pooling to given structures/views/instants (tokens are matched
    case-insensitively, unknown tokens raise).  Pairs where either side is
    non-finite (failed cases) are dropped.

    Raises
    ------
    CamusBenchError
        The case keys do not match (unmatched keys are listed).
    """
    if metric not in _METRIC_KEYS:
        raise ValueError(f"metric must be one of {sorted(_METRIC_KEYS)}, got {metric!r}")
    value_key = _METRIC_KEYS[metric]
    structures = _normalize_filter(
        structures, {s.value.lower(): s.value for s in STRUCTURES}, "structure"
    )
    views = _normalize_filter(views, {v.lower(): v for v in VIEWS}, "view")
    instants = _normalize_filter(instants, {i.lower(): i for i in INSTANTS}, "instant")

    def keyed(rows: Sequence[Mapping]) -> dict[tuple, float]:
        out = {}
        for row in rows:
            key = (row["patient_id"], row["view"], row["instant"], row["structure"])
            if key in out:
                raise CamusBenchError(f"duplicate case key {key}")
            out[key] = float(row[value_key])
        return out

    a = keyed(report_a_cases)
    b = keyed(report_b_cases)
    if set(a) != set(b):
        unmatched = sorted(set(a).symmetric_difference(set(b)))
        shown = ", ".join(repr(key) for key in unmatched[:5])
        more = f" (+{len(unmatched) - 5} more)" if len(unmatched) > 5 else ""
        raise CamusBenchError(f"case keys do not match: {shown}{more}")

    def selected(key: tuple) -> bool:
        _, view, instant, structure = key
        if structures is not None and structure not in set(structures):
            return False
        if views is not None and view not in set(views):
            return False
        if instants is not None and instant not in set(instants):
            return False
        return True

    keys = [key for key in sorted(a) if selected(key)]
    x = [a[key] for key in keys]
    y = [b[key] for key in keys]
    finite = [
        (xv, yv) for xv, yv in zip(x, y) if math.isfinite(xv) and math.isfinite(yv)
    ]
    if not finite:
        raise CamusBenchError("no finite matched pairs to compare")
    xs, ys = zip(*finite)
    return wilcoxon_signed_rank(list(xs), list(ys))


# ---------------------------------------------------------------------------
# Rendering and (de)serialization
# ---------------------------------------------------------------------------


def cases_to_csv(cases: Sequence[Mapping]) -> str:
    """Per-case score table as CSV (the input of ``compare_methods``)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["patient_id", "view", "instant", "structure", "dice", "dm", "dh", "outlier"])
    for row in cases:
        writer.writerow(
            [
                row["patient_id"],
                row["view"],
                row["instant"],
                row["structure"],
                repr(float(row["dice"])),
                repr(float(row["d_m"])),
                repr(float(row["d_H"])),
                "true" if row["outlier"] else "false",
            ]
        )
    return buffer.getvalue()


def cases_from_csv(text: str) -> list[dict]:
    """Parse a per-case score table produced by :func:`cases_to_csv`."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [cell.strip() for cell in rows[0]] != [
        "patient_id", "view", "instant", "structure", "dice", "dm", "dh", "outlier",
    ]:
        raise CamusBenchError("case CSV must start with the standard header row")
    cases = []
    for row_number, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 8:
            raise CamusBenchError(f"case CSV row {row_number}: expected 8 columns")
        try:
            cases.append(
                {
                    "patient_id": row[0],
                    "view": row[1],
                    "instant": row[2],
                    "structure": row[3],
                    "dice": float(row[4]),
                    "d_m": float(row[5]),
                    "d_H": float(row[6]),
                    "outlier": row[7].strip().lower() == "true",
                }
            )
        except ValueError as exc:
            raise CamusBenchError(f"case CSV row {row_number}: {exc}") from None
    return cases


def _flatten(value, path: str, rows: list[tuple[str, str, str]]) -> None:
    if isinstance(value, Mapping):
        for key in sorted(value):
            _flatten(value[key], f"{path}/{key}" if path else str(key), rows)
    elif isinstance(value, (list, tuple)):
        rows.append((path + "/#len", "int", str(len(value))))
        for index, item in enumerate(value):
            _flatten(item, f"{path}/{index}", rows)
    elif value is None:
        rows.append((path, "null", ""))
    elif isinstance(value, bool):
        rows.append((path, "bool", "true" if value else "false"))
    elif isinstance(value, int):
        rows.append((path, "int", str(value)))
    elif isinstance(value, float):
        rows.append((path, "float", repr(value)))
    else:
        rows.append((path, "str", str(value)))


_UNSET = object()


def _unflatten(rows: Sequence[tuple[str, str, str]]) -> dict:
    lengths: dict[tuple[str, ...], int] = {}
    scalars: list[tuple[tuple[str, ...], object]] = []
    for path, kind, raw in rows:
        parts = tuple(path.split("/"))
        if parts[-1] == "#len":
            lengths[parts[:-1]] = int(raw)
            continue
        value: object
        if kind == "null":
            value = None
        elif kind == "bool":
            value = raw == "true"
        elif kind == "int":
            value = int(raw)
        elif kind == "float":
            value = float(raw)
        else:
            value = raw
        scalars.append((parts, value))

    root: dict = {}

    def ensure_child(node, key: str, child_parts: tuple[str, ...]):
        make_list = child_parts in lengths
        if isinstance(node, list):
            index = int(key)
            while len(node) <= index:
                node.append(_UNSET)
            if node[index] is _UNSET:
                node[index] = [] if make_list else {}
            return node[index]
        if key not in node:
            node[key] = [] if make_list else {}
        return node[key]

    # Materialize list containers first (outermost first) so that empty
    # lists survive the round trip.
    for parts in sorted(lengths, key=len):
        node = root
        for depth, key in enumerate(parts):
            node = ensure_child(node, key, parts[: depth + 1])

    for parts, value in scalars:
        node = root
        for depth, key in enumerate(parts[:-1]):
            node = ensure_child(node, key, parts[: depth + 1])
        if isinstance(node, list):
            index = int(parts[-1])
            while len(node) <= index:
                node.append(_UNSET)
            node[index] = value
        else:
            node[parts[-1]] = value

    # Pad lists to their recorded lengths; unassigned slots were empty dicts.
    def resolve(parts: tuple[str, ...]):
        node = root
        for key in parts:
            node = node[int(key)] if isinstance(node, list) else node[key]
        return node

    for parts, length in sorted(lengths.items(), key=lambda item: len(item[0])):
        seq = resolve(parts)
        while len(seq) < length:
            seq.append(_UNSET)
        for index, item in enumerate(seq):
            if item is _UNSET:
                seq[index] = {}
    return root


def render_report(report: MethodReport, format: str = "json") -> bytes:
    """Serialize ``report`` deterministically as JSON, flat CSV, or Markdown.

    The CSV form is a flat ``path,type,value`` table that round-trips every
    numeric field at full precision (see :func:`report_from_csv`).  Failed
    cases carry infinite distances; the JSON form writes those as the
    (non-strict-JSON) ``Infinity`` literal, which :func:`report_from_json`
    parses back.
    """
    if format == "json":
        return (json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n").encode()
    if format == "csv":
        rows: list[tuple[str, str, str]] = []
        _flatten(report.to_dict(), "", rows)
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["path", "type", "value"])
        writer.writerows(rows)
        return buffer.getvalue().encode()
    if format == "markdown":
        return _render_markdown(report).encode()
    raise ValueError(f"format must be json, csv, or markdown, got {format!r}")


def report_from_json(data: bytes | str) -> MethodReport:
    """Parse a report rendered with ``render_report(..., "json")``."""
    return MethodReport.from_dict(json.loads(data))


def report_from_csv(data: bytes | str) -> MethodReport:
    """Parse a report rendered with ``render_report(..., "csv")``."""
    text = data.decode() if isinstance(data, bytes) else data
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["path", "type", "value"]:
        raise CamusBenchError("report CSV must start with the path,type,value header")
    parsed = [(row[0], row[1], row[2]) for row in rows[1:] if row]
    return MethodReport.from_dict(_unflatten(parsed))


def _fmt(value: float | None, digits: int = 3) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def _render_markdown(report: MethodReport) -> str:
    lines: list[str] = []
    lines.append("# Segmentation benchmark report")
    lines.append("")
    cohort = report.cohort
    lines.append(
        f"Engine version {report.engine_version}; "
        f"{cohort['scored_cases']} of {cohort['selected_cases']} selected cases scored "
        f"({cohort['patients']} patients)."
    )
    filters = cohort.get("filters", {})
    active = {k: v for k, v in filters.items() if v is not None}
    lines.append(f"Filters: {json.dumps(active, sort_keys=True) if active else 'none'}.")
    lines.append("")

    total_rows = sum(entry.get("count", 0) for entry in report.geometric.values())
    if total_rows == 0 and not report.clinical_cases:
        lines.append("**No cases were scored (empty cohort).**")
        lines.append("")

    lines.append("## Geometric agreement")
    lines.append("")
    lines.append("| Structure | Instant | n | D | d_m (mm) | d_H (mm) |")
    lines.append("| --- | --- | ---: | --- | --- | --- |")
    for key in sorted(report.geometric):
        structure, instant = key.split("|")
        entry = report.geometric[key]
        if entry.get("count", 0) == 0:
            lines.append(f"| {structure} | {instant} | 0 | - | - | - |")
            continue
        lines.append(
            f"| {structure} | {instant} | {entry['count']} "
            f"| {_fmt(entry['dice_mean'])} ± {_fmt(entry['dice_std'])} "
            f"| {_fmt(entry['dm_mean'])} ± {_fmt(entry['dm_std'])} "
            f"| {_fmt(entry['dh_mean'])} ± {_fmt(entry['dh_std'])} |"
        )
    lines.append("")

    lines.append("## Clinical agreement")
    lines.append("")
    lines.append("| Index | n | corr | bias ± σ | mae |")
    lines.append("| --- | ---: | --- | --- | --- |")
    for name in ("EDV", "ESV", "EF"):
        entry = report.clinical.get(name, {"count": 0})
        if entry.get("count", 0) == 0:
            lines.append(f"| {name} | 0 | - | - | - |")
            continue
        lines.append(
            f"| {name} | {entry['count']} | {_fmt(entry['corr'])} "
            f"| {_fmt(entry['bias'])} ± {_fmt(entry['std'])} | {_fmt(entry['mae'])} |"
        )
    lines.append("")

    outliers = report.outliers
    lines.append(
        f"Outliers: {outliers['flagged']} of {outliers['scored']} scored structure-cases "
        f"({100.0 * outliers['rate']:.1f}%)."
    )
    lines.append("")
    if report.failures:
        lines.append("## Failures")
        lines.append("")
        for failure in report.failures:
            where = "/".join(
                str(part)
                for part in (
                    failure.get("patient_id"),
                    failure.get("view"),
                    failure.get("instant"),
                    failure.get("structure"),
                )
                if part
            )
            lines.append(f"- {where}: {failure['reason']}")
        lines.append("")
    return "\n".join(lines)
