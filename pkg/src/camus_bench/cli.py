"""Command-line interface.

Exit codes: 0 on success, 1 on usage errors, 2 on data/format errors.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path
from typing import Sequence

import click
import numpy as np

from ._version import __version__
from .clinical import BiplaneCase, simpson_biplane
from .dataset_io import read_mask
from .errors import CamusBenchError
from .geometry import Contour, StructureId, keep_largest_fill_holes, region_of, trace_contour
from .harness import (
    cases_from_csv,
    cases_to_csv,
    compare_methods,
    evaluate_submission,
    make_folds,
    render_report,
    report_from_csv,
    report_from_json,
)

_FORMATS = ("json", "csv", "markdown")


def _split_tokens(ctx, param, value):
    if value is None:
        return None
    tokens = tuple(token for token in (part.strip() for part in value.split(",")) if token)
    if not tokens:
        raise click.BadParameter("expected a comma-separated list")
    return tokens


def _split_ints(ctx, param, value):
    tokens = _split_tokens(ctx, param, value)
    if tokens is None:
        return None
    try:
        return tuple(int(token) for token in tokens)
    except ValueError:
        raise click.BadParameter("expected a comma-separated list of integers") from None


@click.group(name="camus-bench")
@click.version_option(version=__version__, prog_name="camus-bench")
def cli() -> None:
    """Echocardiographic segmentation benchmark engine."""


@cli.command()
@click.option("--pred", "pred_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Directory of predicted masks (<patient>_<view>_<instant>.mhd).")
@click.option("--ref", "ref_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Directory of reference masks with the same layout.")
@click.option("--manifest", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Cohort manifest CSV.")
@click.option("--quality", callback=_split_tokens, default=None,
              help="Only score these image qualities (e.g. good,medium).")
@click.option("--folds", callback=_split_ints, default=None,
              help="Only score patients in these folds (e.g. 5 or 1,2,3).")
@click.option("--views", callback=_split_tokens, default=None,
              help="Only score these views (e.g. 2ch,4ch).")
@click.option("--instants", callback=_split_tokens, default=None,
              help="Only score these instants (e.g. ed,es).")
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False, path_type=Path),
              help="Where to write the report.")
@click.option("--format", "format_", type=click.Choice(_FORMATS), default="json",
              show_default=True, help="Report format.")
@click.option("--cases", "cases_path", default=None,
              type=click.Path(dir_okay=False, path_type=Path),
              help="Also write the per-case score table (CSV) here; this is the "
                   "input format of `compare`.")
@click.option("--no-postprocess", is_flag=True,
              help="Score predictions as-is (skip largest-component + hole fill).")
@click.option("--outlier-combine", type=click.Choice(("or", "and")), default="or",
              show_default=True, help="How the d_m/d_H outlier criteria are joined.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker processes for per-case scoring.")
def score(pred_dir, ref_dir, manifest, quality, folds, views, instants,
          out_path, format_, cases_path, no_postprocess, outlier_combine, workers):
    """Score a submission directory against a reference directory."""
    report = evaluate_submission(
        pred_dir,
        ref_dir,
        manifest,
        qualities=quality,
        folds=folds,
        views=views,
        instants=instants,
        postprocess=not no_postprocess,
        outlier_combine=outlier_combine,
        workers=workers,
    )
    out_path.write_bytes(render_report(report, format_))
    if cases_path is not None:
        cases_path.write_text(cases_to_csv(report.cases), encoding="utf-8")
    click.echo(
        f"scored {report.cohort['scored_cases']} of {report.cohort['selected_cases']} "
        f"selected cases; {len(report.failures)} failure(s); "
        f"outlier rate {100.0 * report.outliers['rate']:.1f}%"
    )


@cli.command()
@click.option("--manifest", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Cohort manifest CSV.")
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True,
              help="Number of folds.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Shuffle seed (assignment is deterministic per seed).")
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False, path_type=Path),
              help="Where to write the patient_id,fold CSV.")
def folds(manifest, k, seed, out_path):
    """Assign patients to stratified cross-validation folds."""
    from .dataset_io import load_manifest

    assignment = make_folds(load_manifest(manifest), k=k, seed=seed)
    out_path.write_text(assignment.to_csv(), encoding="utf-8")
    sizes = ", ".join(str(size) for size in assignment.fold_sizes())
    click.echo(f"assigned {len(assignment.assignments)} patients to {k} folds ({sizes})")


@cli.command()
@click.option("--a", "path_a", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Per-case score CSV of method A (see `score --cases`).")
@click.option("--b", "path_b", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Per-case score CSV of method B.")
@click.option("--metric", type=click.Choice(("dice", "dm", "dh")), default="dm",
              show_default=True, help="Which per-case metric to compare.")
@click.option("--structures", callback=_split_tokens, default=None,
              help="Pool only these structures (e.g. LV_endo,LV_epi).")
@click.option("--views", callback=_split_tokens, default=None,
              help="Pool only these views.")
@click.option("--instants", callback=_split_tokens, default=None,
              help="Pool only these instants.")
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False, path_type=Path),
              help="Where to write the Wilcoxon result (JSON).")
def compare(path_a, path_b, metric, structures, views, instants, out_path):
    """Wilcoxon signed-rank test between two methods' per-case scores."""
    import json

    cases_a = cases_from_csv(path_a.read_text(encoding="utf-8"))
    cases_b = cases_from_csv(path_b.read_text(encoding="utf-8"))
    result = compare_methods(
        cases_a, cases_b, metric=metric,
        structures=structures, views=views, instants=instants,
    )
    payload = {
        "metric": metric,
        "w_plus": result.w_plus,
        "n_effective": result.n_effective,
        "p_value": result.p_value,
        "method": result.method,
    }
    out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"p = {result.p_value!r} ({result.method}, n_effective = {result.n_effective})")


def _load_contour(path: Path) -> Contour:
    """A 2CH/4CH input is either a label mask (.mhd) or an x_mm,z_mm CSV."""
    if path.suffix.lower() == ".mhd":
        mask = read_mask(path)
        region = keep_largest_fill_holes(region_of(mask, StructureId.LV_ENDO))
        return trace_contour(region, mask.spacing)
    rows = [row for row in csv.reader(path.read_text(encoding="utf-8").splitlines()) if row]
    if not rows or [cell.strip().lower() for cell in rows[0]] != ["x_mm", "z_mm"]:
        raise CamusBenchError(f"{path}: contour CSV must have header x_mm,z_mm")
    try:
        points = np.array([[float(row[0]), float(row[1])] for row in rows[1:]], dtype=float)
    except (ValueError, IndexError):
        raise CamusBenchError(f"{path}: contour CSV rows must be two floats") from None
    return Contour(points=points)


@cli.command()
@click.option("--c2ch", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Two-chamber LV endocardial contour (.mhd mask or x_mm,z_mm CSV).")
@click.option("--c4ch", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Four-chamber LV endocardial contour (.mhd mask or x_mm,z_mm CSV).")
@click.option("--discs", type=click.IntRange(min=1), default=20, show_default=True,
              help="Number of disc levels.")
def simpson(c2ch, c4ch, discs):
    """Biplane Simpson LV volume (prints ml)."""
    case = BiplaneCase(contour_2ch=_load_contour(c2ch), contour_4ch=_load_contour(c4ch))
    volume = simpson_biplane(case, discs=discs)
    click.echo(f"{volume:.6f} ml")


@cli.command()
@click.option("--in", "in_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="A report previously written by `score` (json or csv).")
@click.option("--format", "format_", type=click.Choice(_FORMATS), required=True,
              help="Output format (written to stdout).")
def render(in_path, format_):
    """Re-render a stored report in another format."""
    data = in_path.read_bytes()
    if in_path.suffix.lower() == ".csv":
        report = report_from_csv(data)
    else:
        report = report_from_json(data)
    sys.stdout.buffer.write(render_report(report, format_))
    sys.stdout.buffer.flush()


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI; returns the exit code instead of raising SystemExit."""
    try:
        cli.main(args=list(argv) if argv is not None else None, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.exceptions.NoArgsIsHelpError as exc:
        click.echo(exc.format_message())
        return 0
    except click.ClickException as exc:
        exc.show()
        return 1
    except ValueError as exc:
        click.echo(f"usage error: {exc}", err=True)
        return 1
    except (CamusBenchError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def entrypoint() -> None:
    raise SystemExit(main())
