"""Acceptance gates: architecture fidelity and the end-to-end toy pipeline."""

import json
import shutil
import subprocess
import time

import pytest
import torch

from refmodels import ARCHITECTURES, build, parameter_count
from refmodels.cli import main as cli_main

from test_losses import random_case, relative_gradient_errors

SEGMENTERS = ("unet1", "unet2", "acnn", "shg", "unetpp")


def test_architectures_match_their_published_identity(criterion):
    with criterion(
        "architectures: parameter budgets +-5%, 256x256x4 probabilities sum to 1 +-1e-5"
    ):
        for name, spec in ARCHITECTURES.items():
            if spec.declared_parameters is None:
                continue
            low, high = spec.tolerance_band(rel=0.05)
            assert low <= parameter_count(build(name)) <= high, name
        for name in SEGMENTERS:
            torch.manual_seed(0)
            model = build(name).eval()
            with torch.inference_mode():
                out = model(torch.randn(1, 1, 256, 256))
            assert out.shape == (1, 4, 256, 256), name
            assert float((out.sum(dim=1) - 1).abs().max()) < 1e-5, name


def test_loss_gradients_are_exact(criterion):
    with criterion(
        "losses: autograd matches central differences <= 1e-3 relative "
        "(dice, cross entropy, composite, deep supervision)"
    ):
        for name in ("unet1", "unet2", "acnn", "shg"):
            torch.manual_seed(0)
            model = build(name)
            x, targets = random_case(seed=4)
            errors = relative_gradient_errors(model, x, targets)
            assert errors, name
            assert max(errors) <= 1e-3, (name, errors)


@pytest.mark.acceptance_e2e
def test_toy_model_scores_through_the_engine(criterion, tmp_path):
    with criterion(
        "toy gate: unet1 overfits 8 phantoms in <= 500 steps / < 10 min and "
        "every structure-instant mean Dice through `camus-bench score` > 0.95"
    ):
        started = time.monotonic()
        assert cli_main(["toy-train", "unet1", "--seed", "0", "--out", str(tmp_path)]) == 0
        elapsed = time.monotonic() - started
        assert elapsed < 600.0, f"toy training took {elapsed:.0f}s"

        payload = torch.load(tmp_path / "unet1.pt", map_location="cpu", weights_only=True)
        assert payload["steps"] <= 500
        assert payload["final_dice"] > 0.95

        predictions = tmp_path / "preds"
        assert cli_main(
            ["predict", "unet1", "--weights", str(tmp_path / "unet1.pt"),
             "--images", str(tmp_path / "images"), "--out", str(predictions)]
        ) == 0

        engine = shutil.which("camus-bench")
        assert engine, "the benchmark engine CLI must be installed to score the gate"
        completed = subprocess.run(
            [engine, "score",
             "--pred", str(predictions),
             "--ref", str(tmp_path / "refs"),
             "--manifest", str(tmp_path / "manifest.csv"),
             "--out", str(tmp_path / "report.json")],
            capture_output=True,
            text=True,
        )
        assert completed.returncode == 0, completed.stderr

        report = json.loads((tmp_path / "report.json").read_text())
        for structure in ("LV_endo", "LV_epi", "LA"):
            for instant in ("ED", "ES"):
                entry = report["geometric"][f"{structure}|{instant}"]
                assert entry["count"] == 4, (structure, instant, entry)
                assert entry["dice_mean"] > 0.95, (structure, instant, entry)
