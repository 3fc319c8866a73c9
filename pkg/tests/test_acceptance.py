"""Acceptance suite: one test (and one summary line) per release criterion.

Every test checks a calibration target with an explicitly stated tolerance,
against independent oracles (brute force, exhaustive enumeration, or closed
forms) wherever the expected value is not a direct contract constant.
"""

import math
import time

import numpy as np
import pytest

from camus_bench import (
    DegenerateRegionError,
    LabelMask,
    PatientCase,
    classify_outlier,
    dice,
    ejection_fraction,
    evaluate_submission,
    hausdorff,
    keep_largest_fill_holes,
    make_folds,
    mean_absolute_distance,
    read_mask,
    render_report,
    simpson_biplane,
    trace_contour,
    wilcoxon_signed_rank,
    write_mask,
)
from camus_bench.clinical import BiplaneCase
from camus_bench.metrics import GeometricScores

from oracles import (
    oracle_dice,
    oracle_hausdorff,
    oracle_mean_absolute_distance,
    oracle_postprocess,
    oracle_wilcoxon,
)
from phantoms import copy_cohort, ellipse_contour, write_cohort


def circle_contour(radius: float, n: int):
    from camus_bench import Contour

    angles = 2.0 * math.pi * np.arange(n) / n
    points = np.stack(
        [radius * np.cos(angles), radius * np.sin(angles)], axis=1
    )
    return Contour(points=points)


def test_criterion_1_metric_oracle_equivalence(criterion):
    """d_m/d_H match a brute-force point-to-segment oracle to 1e-9 mm and
    Dice matches direct pixel counting exactly, on >= 200 random mask pairs
    of size <= 16x16, in under 10 seconds."""
    with criterion(
        "metrics vs brute-force oracle (>=200 random pairs <=16x16, 1e-9 mm, <10 s)"
    ):
        rng = np.random.default_rng(2024)
        spacings = [(0.25, 0.25), (0.5, 0.5), (1.0, 0.7), (1.5, 1.5)]
        start = time.perf_counter()
        compared = 0
        attempts = 0
        while compared < 200:
            attempts += 1
            assert attempts < 2000, "random pair generation stalled"
            h = int(rng.integers(3, 17))
            w = int(rng.integers(3, 17))
            a = rng.random((h, w)) < rng.uniform(0.3, 0.8)
            b = rng.random((h, w)) < rng.uniform(0.3, 0.8)

            assert dice(a, b) == oracle_dice(a, b)

            spacing = spacings[int(rng.integers(len(spacings)))]
            try:
                ca = trace_contour(keep_largest_fill_holes(a), spacing)
                cb = trace_contour(keep_largest_fill_holes(b), spacing)
            except DegenerateRegionError:
                continue
            pa = ca.points.tolist()
            pb = cb.points.tolist()
            assert mean_absolute_distance(ca, cb) == pytest.approx(
                oracle_mean_absolute_distance(pa, pb), abs=1e-9
            )
            assert hausdorff(ca, cb) == pytest.approx(
                oracle_hausdorff(pa, pb), abs=1e-9
            )
            compared += 1
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"oracle comparison took {elapsed:.1f} s"


def test_criterion_2_concentric_circle_calibration(criterion):
    """Densely sampled concentric circles of radii 20 and 23 mm measure
    d_m = d_H = 3.0 mm within 0.01 mm."""
    with criterion("concentric circles r=20,23 mm -> d_m = d_H = 3.0 mm +-0.01"):
        inner = circle_contour(20.0, 10000)
        outer = circle_contour(23.0, 10001)
        assert mean_absolute_distance(inner, outer) == pytest.approx(3.0, abs=0.01)
        assert hausdorff(inner, outer) == pytest.approx(3.0, abs=0.01)


def test_criterion_3_simpson_calibration(criterion):
    """Simpson biplane on an identical 80x50 mm ellipse pair gives 104.72 ml
    (1% at N=20, 0.01% at N=1e5); a 60 mm sphere gives 113.10 ml in the same
    bands; EF(120, 60) is exactly 50.0."""
    with criterion(
        "Simpson: 80x50 ellipse -> 104.72 ml (1% @ N=20, 0.01% @ N=1e5); "
        "sphere d=60 -> 113.10 ml; EF(120,60) = 50.0 exactly"
    ):
        ellipse = ellipse_contour(40.0, 25.0)
        spheroid = BiplaneCase(contour_2ch=ellipse, contour_4ch=ellipse)
        assert simpson_biplane(spheroid, discs=20) == pytest.approx(104.72, rel=0.01)
        assert simpson_biplane(spheroid, discs=10**5) == pytest.approx(104.72, rel=1e-4)

        circle = ellipse_contour(30.0, 30.0)
        sphere = BiplaneCase(contour_2ch=circle, contour_4ch=circle)
        assert simpson_biplane(sphere, discs=20) == pytest.approx(113.10, rel=0.01)
        assert simpson_biplane(sphere, discs=10**5) == pytest.approx(113.10, rel=1e-4)

        assert ejection_fraction(120.0, 60.0) == 50.0


def test_criterion_4_wilcoxon_exactness(criterion):
    """For 1000 random paired samples with n <= 12, the reported p-value
    equals full 2^n enumeration exactly; differences {1..5} give p = 0.0625."""
    with criterion(
        "Wilcoxon: p == 2^n enumeration on 1000 random samples (n<=12); "
        "{1,2,3,4,5} -> p = 0.0625"
    ):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            x = rng.integers(-3, 4, size=n).astype(float).tolist()
            y = rng.integers(-3, 4, size=n).astype(float).tolist()
            result = wilcoxon_signed_rank(x, y)
            p, w_plus, n_effective = oracle_wilcoxon(x, y)
            assert result.method == "exact"
            assert result.p_value == p
            assert result.w_plus == w_plus
            assert result.n_effective == n_effective

        fixed = wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0, 5.0], [0.0] * 5)
        assert fixed.p_value == 0.0625


def test_criterion_5_postprocess_oracle(criterion):
    """Largest-component + hole-fill post-processing is idempotent and agrees
    with a pure flood-fill oracle on 1000 random 64x64 masks."""
    with criterion(
        "post-processing: idempotent and flood-fill-oracle-equal "
        "on 1000 random 64x64 masks"
    ):
        rng = np.random.default_rng(5)
        for index in range(1000):
            density = 0.2 + 0.5 * (index % 10) / 9.0
            mask = rng.random((64, 64)) < density
            out = keep_largest_fill_holes(mask)
            assert np.array_equal(out, keep_largest_fill_holes(out))
            assert np.array_equal(out, oracle_postprocess(mask))


def test_criterion_6_harness_determinism(criterion, tmp_path):
    """Self-scoring a reference cohort yields Dice 1.0, zero distances, zero
    outliers, and byte-identical reports with 1 and 8 workers; the outlier
    thresholds fire strictly above d_m 3.5/4.0 and d_H 8.2/8.8 (ED/ES)."""
    with criterion(
        "harness: self-score = Dice 1.0 / 0 mm / 0% outliers, byte-identical "
        "across 1 vs 8 workers; thresholds strict at 3.5/4.0 and 8.2/8.8"
    ):
        manifest, ref_dir = write_cohort(tmp_path, n_patients=6)
        pred_dir = tmp_path / "pred"
        copy_cohort(ref_dir, pred_dir)

        serial = evaluate_submission(pred_dir, ref_dir, manifest, workers=1)
        parallel = evaluate_submission(pred_dir, ref_dir, manifest, workers=8)
        assert render_report(serial, "json") == render_report(parallel, "json")
        assert render_report(serial, "csv") == render_report(parallel, "csv")

        assert len(serial.cases) == 72
        for row in serial.cases:
            assert row["dice"] == 1.0
            assert row["d_m"] == 0.0
            assert row["d_H"] == 0.0
        assert serial.outliers == {"flagged": 0, "scored": 72, "rate": 0.0}
        for name in ("EDV", "ESV", "EF"):
            assert serial.clinical[name]["corr"] == pytest.approx(1.0, abs=1e-12)
            assert serial.clinical[name]["bias"] == 0.0

        def g(d_m, d_H):
            return GeometricScores(dice=0.9, d_m=d_m, d_H=d_H)

        up = lambda v: math.nextafter(v, math.inf)
        assert not classify_outlier(g(3.5, 8.2), "ED")
        assert not classify_outlier(g(4.0, 8.8), "ES")
        assert classify_outlier(g(up(3.5), 8.2), "ED")
        assert classify_outlier(g(3.5, up(8.2)), "ED")
        assert classify_outlier(g(up(4.0), 8.8), "ES")
        assert classify_outlier(g(4.0, up(8.8)), "ES")


def test_criterion_7_fold_stratification(criterion):
    """A 500-patient manifest with the documented global mix (35/46/19 quality,
    49/19/32 EF) splits into 10 folds of 50 whose per-fold shares stay within
    +-2 percentage points of the global shares."""
    with criterion(
        "folds: 500 patients, 10 folds of 50; quality within +-2 pts of "
        "35/46/19 and EF within +-2 pts of 49/19/32"
    ):
        contingency = {
            "Good": {"<=45%": 86, ">=55%": 33, "else": 56},
            "Medium": {"<=45%": 113, ">=55%": 44, "else": 73},
            "Poor": {"<=45%": 46, ">=55%": 18, "else": 31},
        }
        cases = []
        index = 0
        for quality, row in contingency.items():
            for ef_group, count in row.items():
                for _ in range(count):
                    cases.append(
                        PatientCase(
                            patient_id=f"patient{index:04d}", view="2CH",
                            instant="ED", quality=quality, ef_group=ef_group,
                        )
                    )
                    index += 1
        assert index == 500

        folds = make_folds(cases, k=10, seed=0)
        assert folds.fold_sizes() == [50] * 10

        quality_share = {"Good": 35.0, "Medium": 46.0, "Poor": 19.0}
        ef_share = {"<=45%": 49.0, ">=55%": 19.0, "else": 32.0}
        by_pid = {c.patient_id: c for c in cases}
        for fold in range(1, 11):
            members = [by_pid[p] for p, f in folds.assignments.items() if f == fold]
            for quality, share in quality_share.items():
                percent = 100.0 * sum(m.quality == quality for m in members) / 50.0
                assert abs(percent - share) <= 2.0
            for ef_group, share in ef_share.items():
                percent = 100.0 * sum(m.ef_group == ef_group for m in members) / 50.0
                assert abs(percent - share) <= 2.0


def test_criterion_8_mask_round_trip(criterion, tmp_path):
    """Writing and re-reading 1000 random masks is bit-identical: same label
    array, exact spacing, preserved extra header keys, and a byte-identical
    file when written again."""
    with criterion("mask files: write -> read bit-identical for 1000 random masks"):
        rng = np.random.default_rng(17)
        path = tmp_path / "mask.mhd"
        raw_path = tmp_path / "mask.raw"
        for index in range(1000):
            h = int(rng.integers(1, 49))
            w = int(rng.integers(1, 49))
            labels = rng.integers(0, 4, size=(h, w), dtype=np.uint8)
            extra = (("Comment", f"case {index}"),) if index % 7 == 0 else ()
            mask = LabelMask(
                labels=labels,
                spacing_x=float(rng.uniform(0.05, 2.0)),
                spacing_z=float(rng.uniform(0.05, 2.0)),
                extra_keys=extra,
            )
            write_mask(mask, path)
            header_bytes = path.read_bytes()
            raw_bytes = raw_path.read_bytes()

            loaded = read_mask(path)
            assert np.array_equal(loaded.labels, labels)
            assert loaded.labels.dtype == np.uint8
            assert loaded.spacing_x == mask.spacing_x
            assert loaded.spacing_z == mask.spacing_z
            assert loaded.extra_keys == extra

            write_mask(loaded, path)
            assert path.read_bytes() == header_bytes
            assert raw_path.read_bytes() == raw_bytes
