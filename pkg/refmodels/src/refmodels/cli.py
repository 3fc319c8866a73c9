"""Command-line interface.

Exit codes: 0 on success, 1 on usage errors, 2 on data/format errors.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Sequence

import click

from ._version import __version__
from .errors import RefModelsError
from .export import predict_and_export
from .formats import atomic_write_image
from .models import ARCHITECTURES, build as build_model, parameter_count
from .phantoms import make_phantom_set, manifest_csv
from .training import (
    default_config,
    load_checkpoint,
    save_checkpoint,
    train_toy,
)


@click.group(name="refmodels")
@click.version_option(version=__version__, prog_name="refmodels")
def cli() -> None:
    """Reference neural networks for echocardiographic segmentation."""


@cli.command(name="build")
@click.argument("name")
@click.option("--summary", is_flag=True, help="Also print a per-module parameter breakdown.")
def build_command(name: str, summary: bool) -> None:
    """Instantiate architecture NAME and report its parameter count."""
    model = build_model(name)
    count = parameter_count(model)
    spec = ARCHITECTURES[name]
    if spec.declared_parameters is None:
        click.echo(f"{name}: {count:,} parameters")
    else:
        delta = (count - spec.declared_parameters) / spec.declared_parameters
        click.echo(
            f"{name}: {count:,} parameters "
            f"({delta:+.2%} of the declared {spec.declared_parameters:,})"
        )
    click.echo(spec.description)
    if summary:
        for child_name, child in model.named_children():
            click.echo(f"  {child_name}: {parameter_count(child):,}")


@cli.command(name="toy-train")
@click.argument("name")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for both the phantom set and the weight initialization.")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path),
              help="Output directory (created if missing).")
@click.option("--size", type=int, default=256, show_default=True,
              help="Phantom image size in pixels (must be divisible by 32).")
@click.option("--max-steps", type=int, default=None,
              help="Override the optimization step budget.")
def toy_train_command(
    name: str, seed: int, out_dir: Path, size: int, max_steps: int | None
) -> None:
    """Overfit architecture NAME on a synthetic eight-case phantom cohort.

    Writes the cohort (images/, refs/, manifest.csv) and the trained
    weights (NAME.pt) under --out, ready for `predict` and for scoring
    the exported masks against refs/ with the benchmark engine.
    """
    overrides = {} if max_steps is None else {"max_steps": max_steps}
    config = default_config(name, **overrides)
    phantoms = make_phantom_set(seed, size=size)

    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "refs").mkdir(parents=True, exist_ok=True)
    for phantom in phantoms:
        atomic_write_image(phantom.image, out_dir / "images" / f"{phantom.name}.mhd")
        atomic_write_image(phantom.mask, out_dir / "refs" / f"{phantom.name}.mhd")
    (out_dir / "manifest.csv").write_text(manifest_csv(phantoms), encoding="ascii")

    result = train_toy(name, phantoms, config, seed=seed)
    weights = out_dir / f"{name}.pt"
    save_checkpoint(result, weights, seed=seed)
    click.echo(
        f"{name}: training Dice {result.final_dice:.4f} after {result.steps} steps"
    )
    click.echo(f"weights: {weights}")


@cli.command(name="predict")
@click.argument("name")
@click.option("--weights", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Checkpoint written by toy-train.")
@click.option("--images", "images_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Directory of input images (*.mhd).")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path),
              help="Output directory for the predicted masks.")
def predict_command(name: str, weights: Path, images_dir: Path, out_dir: Path) -> None:
    """Segment every image in --images with NAME and write label masks."""
    architecture, model = load_checkpoint(weights)
    if architecture != name:
        raise click.UsageError(
            f"checkpoint holds {architecture!r} weights, not {name!r}"
        )
    written = predict_and_export(model, images_dir, out_dir)
    click.echo(f"wrote {len(written)} masks to {out_dir}")


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
    except (RefModelsError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    sys.exit(main())
