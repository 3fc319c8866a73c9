"""camus-bench: benchmark engine for 2D echocardiographic segmentation.

Scores multi-structure label masks (LV endocardium, LV epicardium, left
atrium) against references with overlap and contour-distance metrics,
derives clinical indices (biplane Simpson volumes, ejection fraction),
runs statistical comparisons, builds stratified cross-validation folds,
and renders deterministic reports.  See the ``camus-bench`` CLI.
"""

from ._version import __version__
from .clinical import (
    BiplaneCase,
    ClinicalScores,
    LongAxis,
    ejection_fraction,
    long_axis,
    simpson_biplane,
)
from .dataset_io import (
    ANNOTATION_LABELS,
    EF_GROUPS,
    INSTANTS,
    QUALITIES,
    VIEWS,
    LabelMask,
    PatientCase,
    PolarImage,
    load_manifest,
    read_mask,
    scan_convert,
    write_mask,
)
from .errors import (
    CamusBenchError,
    DegenerateAxisError,
    DegenerateRegionError,
    DomainError,
    LabelValidationError,
    ManifestError,
    MaskFormatError,
    MaskTruncationError,
    MissingReferenceError,
    ShapeError,
)
from .geometry import (
    Contour,
    StructureId,
    keep_largest_fill_holes,
    region_of,
    trace_contour,
)
from .harness import (
    FoldAssignment,
    MethodReport,
    OutlierRule,
    cases_from_csv,
    cases_to_csv,
    classify_outlier,
    compare_methods,
    evaluate_submission,
    make_folds,
    render_report,
    report_from_csv,
    report_from_json,
)
from .metrics import (
    GeometricScores,
    dice,
    directed_avg_distance,
    hausdorff,
    mean_absolute_distance,
    score_case,
)
from .stats import (
    AgreementStats,
    WilcoxonResult,
    agreement,
    bland_altman,
    bland_altman_csv,
    wilcoxon_signed_rank,
)

__all__ = [
    "ANNOTATION_LABELS",
    "AgreementStats",
    "BiplaneCase",
    "CamusBenchError",
    "ClinicalScores",
    "Contour",
    "DegenerateAxisError",
    "DegenerateRegionError",
    "DomainError",
    "EF_GROUPS",
    "FoldAssignment",
    "GeometricScores",
    "INSTANTS",
    "LabelMask",
    "LabelValidationError",
    "LongAxis",
    "ManifestError",
    "MaskFormatError",
    "MaskTruncationError",
    "MethodReport",
    "MissingReferenceError",
    "OutlierRule",
    "PatientCase",
    "PolarImage",
    "QUALITIES",
    "ShapeError",
    "StructureId",
    "VIEWS",
    "WilcoxonResult",
    "__version__",
    "agreement",
    "bland_altman",
    "bland_altman_csv",
    "cases_from_csv",
    "cases_to_csv",
    "classify_outlier",
    "compare_methods",
    "dice",
    "directed_avg_distance",
    "ejection_fraction",
    "evaluate_submission",
    "hausdorff",
    "keep_largest_fill_holes",
    "load_manifest",
    "long_axis",
    "make_folds",
    "mean_absolute_distance",
    "read_mask",
    "region_of",
    "render_report",
    "report_from_csv",
    "report_from_json",
    "scan_convert",
    "score_case",
    "simpson_biplane",
    "trace_contour",
    "write_mask",
]
