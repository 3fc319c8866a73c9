"""Toy-scale training: deterministically overfit a small phantom set."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .errors import FormatError, TrainingDivergedError
from .losses import (
    acnn_loss,
    cross_entropy_loss,
    deep_supervision_loss,
    hard_dice,
    one_hot,
    soft_dice_loss,
)
from .models import ACNN, StackedHourglass, UNet2, build
from .phantoms import Phantom
from .preprocess import preprocess

__all__ = [
    "TrainingConfig",
    "ToyTrainResult",
    "default_config",
    "train_toy",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class TrainingConfig:
    """Optimization settings (adaptive-moment gradient descent throughout)."""

    learning_rate: float = 1e-3
    batch_size: int = 32
    max_steps: int = 500
    weight_decay: float = 0.0
    acnn_weight: float = 1e4
    target_dice: float = 0.97

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size <= 0:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.max_steps <= 0:
            raise ValueError(f"max_steps must be positive, got {self.max_steps}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.acnn_weight <= 0:
            raise ValueError(f"acnn_weight must be positive, got {self.acnn_weight}")
        if not 0.0 < self.target_dice <= 1.0:
            raise ValueError(f"target_dice must be in (0, 1], got {self.target_dice}")


def default_config(name: str, **overrides) -> TrainingConfig:
    """The per-architecture defaults: unet2 trains with cross entropy at
    1e-4 with weight decay and smaller batches, everything else with the
    multi-class Dice loss at 1e-3."""
    base: dict = {}
    if name == "unet2":
        base = {"learning_rate": 1e-4, "batch_size": 10, "weight_decay": 1e-4}
    base.update(overrides)
    return TrainingConfig(**base)


@dataclass
class ToyTrainResult:
    model: torch.nn.Module
    architecture: str
    steps: int
    final_loss: float
    final_dice: float
    history: list[dict] = field(default_factory=list)


def _step_loss(model, x, targets, config):
    """One forward pass: (loss, batch probabilities, extra log fields)."""
    targets_hot = one_hot(targets)
    if isinstance(model, ACNN):
        probabilities = model(x)
        total, segmentation, code_mse = acnn_loss(
            model, probabilities, targets_hot, weight=config.acnn_weight
        )
        return total, probabilities, {
            "seg_loss": float(segmentation.detach()),
            "code_mse": float(code_mse.detach()),
        }
    if isinstance(model, StackedHourglass):
        stages = model.forward_stages(x)
        return deep_supervision_loss(stages, targets_hot), stages[-1], {}
    if isinstance(model, UNet2):
        logits = model.logits(x)
        return cross_entropy_loss(logits, targets), torch.softmax(logits, dim=1), {}
    probabilities = model(x)
    return soft_dice_loss(probabilities, targets_hot), probabilities, {}


def train_toy(
    name: str,
    phantoms: list[Phantom],
    config: TrainingConfig | None = None,
    *,
    seed: int = 0,
) -> ToyTrainResult:
    """Overfit ``name`` on ``phantoms`` until the hard training Dice clears
    ``config.target_dice`` or ``config.max_steps`` is reached.

    Training is single-process and fully deterministic for a given seed: the
    seed fixes the weight initialization, and batches sweep the phantoms in
    their given (fixed) order.  The reported Dice is measured on each step's
    training batch from the same forward pass that produced the loss.

    Raises
    ------
    TrainingDivergedError
        The loss became non-finite.
    ValueError
        Empty phantom list, or phantoms of mismatched sizes.
    """
    if not phantoms:
        raise ValueError("at least one phantom is required")
    sizes = {p.image.pixels.shape for p in phantoms}
    if len(sizes) != 1:
        raise ValueError(f"phantoms must share one size, got {sorted(sizes)}")
    config = config or default_config(name)

    torch.manual_seed(seed)
    model = build(name)
    model.train()
    if isinstance(model, ACNN):
        # The shape prior acts as a fixed feature extractor for the
        # code-consistency term; only the backbone is optimized.
        for parameter in model.shape_prior.parameters():
            parameter.requires_grad_(False)

    images = torch.cat([preprocess(p.image.pixels, size=p.image.height) for p in phantoms])
    targets = torch.stack(
        [torch.from_numpy(p.mask.pixels.astype("int64")) for p in phantoms]
    )
    batch_size = min(config.batch_size, len(phantoms))
    starts = range(0, len(phantoms), batch_size)

    optimizer = torch.optim.Adam(
        (p for p in model.parameters() if p.requires_grad),
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
    )

    history: list[dict] = []
    steps = 0
    final_loss = math.nan
    final_dice = 0.0
    done = False
    while not done:
        for start in starts:
            x = images[start : start + batch_size]
            t = targets[start : start + batch_size]
            optimizer.zero_grad()
            loss, probabilities, extra = _step_loss(model, x, t, config)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at step {steps + 1}: {float(loss.detach())!r}"
                )
            loss.backward()
            optimizer.step()
            steps += 1
            final_loss = float(loss.detach())
            final_dice = hard_dice(probabilities.detach(), t)
            history.append(
                {"step": steps, "loss": final_loss, "dice": final_dice, **extra}
            )
            if final_dice > config.target_dice or steps >= config.max_steps:
                done = True
                break

    model.eval()
    return ToyTrainResult(
        model=model,
        architecture=name,
        steps=steps,
        final_loss=final_loss,
        final_dice=final_dice,
        history=history,
    )


def save_checkpoint(result: ToyTrainResult, path: Path | str, *, seed: int = 0) -> None:
    """Write the trained weights plus identifying metadata."""
    torch.save(
        {
            "architecture": result.architecture,
            "state_dict": result.model.state_dict(),
            "steps": result.steps,
            "final_dice": result.final_dice,
            "seed": seed,
        },
        Path(path),
    )


def load_checkpoint(path: Path | str) -> tuple[str, torch.nn.Module]:
    """Rebuild the architecture named in a checkpoint and load its weights.

    Returns ``(architecture_name, model)`` with the model in eval mode.
    Raises :class:`FormatError` for files this package did not write.
    """
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise FormatError(f"{path}: not a readable checkpoint ({exc})") from exc
    if not isinstance(payload, dict) or not {"architecture", "state_dict"} <= set(payload):
        raise FormatError(f"{path}: missing checkpoint keys 'architecture'/'state_dict'")
    model = build(payload["architecture"])
    try:
        model.load_state_dict(payload["state_dict"])
    except (RuntimeError, ValueError) as exc:
        raise FormatError(f"{path}: weights do not match {payload['architecture']}") from exc
    model.eval()
    return payload["architecture"], model
