"""Training losses and the hard-Dice training metric."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .models import NUM_CLASSES, ACNN, StackedHourglass, UNet2

__all__ = [
    "one_hot",
    "soft_dice_loss",
    "cross_entropy_loss",
    "deep_supervision_loss",
    "acnn_loss",
    "model_loss",
    "hard_dice",
]

_EPS = 1e-6


def one_hot(targets: torch.Tensor) -> torch.Tensor:
    """``(N, H, W)`` integer labels to ``(N, 4, H, W)`` float one-hot maps."""
    if targets.dtype not in (torch.int64, torch.int32, torch.uint8):
        raise ValueError(f"targets must be integer labels, got {targets.dtype}")
    return F.one_hot(targets.long(), NUM_CLASSES).permute(0, 3, 1, 2).to(torch.float32)


def soft_dice_loss(probabilities: torch.Tensor, targets_one_hot: torch.Tensor) -> torch.Tensor:
    """Multi-class Dice loss: one minus the mean soft Dice of the foreground
    classes.  A class absent from both prediction and reference contributes
    a perfect score (the stabilizer makes its ratio 1)."""
    if probabilities.shape != targets_one_hot.shape:
        raise ValueError(
            f"shape mismatch: {tuple(probabilities.shape)} vs {tuple(targets_one_hot.shape)}"
        )
    p = probabilities[:, 1:]
    t = targets_one_hot.to(probabilities.dtype)[:, 1:]
    intersection = (p * t).sum(dim=(0, 2, 3))
    volume = p.sum(dim=(0, 2, 3)) + t.sum(dim=(0, 2, 3))
    dice = (2.0 * intersection + _EPS) / (volume + _EPS)
    return 1.0 - dice.mean()


def cross_entropy_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Per-pixel cross entropy on class logits (weight decay is applied by
    the optimizer, not the loss)."""
    return F.cross_entropy(logits, targets.long())


def deep_supervision_loss(
    stage_probabilities: list[torch.Tensor], targets_one_hot: torch.Tensor
) -> torch.Tensor:
    """Mean of the per-stage Dice losses (every hourglass stage supervised)."""
    if not stage_probabilities:
        raise ValueError("at least one supervised stage is required")
    losses = [soft_dice_loss(stage, targets_one_hot) for stage in stage_probabilities]
    return torch.stack(losses).mean()


def acnn_loss(
    model: ACNN,
    probabilities: torch.Tensor,
    targets_one_hot: torch.Tensor,
    weight: float = 1e4,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """ACNN composite loss.

    Returns ``(total, segmentation, code_mse)`` where
    ``total = segmentation + weight * code_mse`` and ``code_mse`` is the mean
    squared distance between the shape-prior codes of the prediction and of
    the reference.
    """
    if weight <= 0:
        raise ValueError(f"weight must be positive, got {weight}")
    segmentation = soft_dice_loss(probabilities, targets_one_hot)
    code_pred = model.code(probabilities)
    code_ref = model.code(targets_one_hot.to(probabilities.dtype))
    code_mse = F.mse_loss(code_pred, code_ref)
    return segmentation + weight * code_mse, segmentation, code_mse


def model_loss(model: torch.nn.Module, x: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """The architecture's own training loss on a batch (used by the trainer
    and by gradient checks): deep supervision for hourglasses, the composite
    loss for ACNN, per-pixel cross entropy for the large U-Net, plain Dice
    otherwise."""
    targets_hot = one_hot(targets).to(x.dtype)
    if isinstance(model, StackedHourglass):
        return deep_supervision_loss(model.forward_stages(x), targets_hot)
    if isinstance(model, ACNN):
        total, _, _ = acnn_loss(model, model(x), targets_hot)
        return total
    if isinstance(model, UNet2):
        return cross_entropy_loss(model.logits(x), targets)
    return soft_dice_loss(model(x), targets_hot)


def hard_dice(probabilities: torch.Tensor, targets: torch.Tensor) -> float:
    """Mean Dice of the argmax segmentation over the foreground classes."""
    predicted = probabilities.argmax(dim=1)
    scores = []
    for label in range(1, NUM_CLASSES):
        p = predicted == label
        t = targets == label
        denom = int(p.sum()) + int(t.sum())
        if denom == 0:
            scores.append(1.0)
        else:
            scores.append(2.0 * int((p & t).sum()) / denom)
    return float(sum(scores) / len(scores))
