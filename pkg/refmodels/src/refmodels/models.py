"""The reference segmentation architectures.

Six networks are provided through :func:`build`:

``unet1``
    Compact U-Net: six 2-conv encoder levels (32, 32, 64, 128, 128, 128),
    nearest-neighbour 2x2 upsampling ("repeat"), decoder widths
    128/128/64/32/16, skip concatenations, final 1x1 conv + softmax.
``unet2``
    Wide U-Net: widths 48 -> 768 doubling per level, batch normalization
    after every convolution, transposed-conv upsampling.
``acnn``
    A unet1-shaped segmentation backbone paired with a convolutional
    autoencoder shape prior (code size 32) used by the training loss.
``shg``
    Stacked hourglass: three successive encoder-decoder stages (widths
    56/112/224) with per-stage prediction heads (deep supervision); the
    final output is the third stage's.
``unetpp``
    U-Net++ with dense skip connections, widths 22/44/88/176 chosen to land
    on the published parameter budget.
``autoencoder``
    The ACNN shape prior on its own: ELU conv encoder to a 13x13 map, a
    dense bottleneck of exactly 32 values, and a transposed-conv decoder
    reconstructing 4-class probability maps.

All segmentation networks map ``(N, 1, H, W)`` images to ``(N, 4, H, W)``
per-pixel class probabilities (softmax), for ``H``, ``W`` divisible by 32.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import UnknownArchitectureError

__all__ = [
    "ArchitectureSpec",
    "ARCHITECTURES",
    "NUM_CLASSES",
    "build",
    "parameter_count",
    "UNet1",
    "UNet2",
    "ACNN",
    "StackedHourglass",
    "UNetPP",
    "Autoencoder",
]

NUM_CLASSES = 4


@dataclass(frozen=True)
class ArchitectureSpec:
    """Identity card of one architecture."""

    name: str
    declared_parameters: int | None
    description: str

    def tolerance_band(self, rel: float = 0.05) -> tuple[int, int]:
        if self.declared_parameters is None:
            raise ValueError(f"{self.name} has no declared parameter count")
        low = int(self.declared_parameters * (1 - rel))
        high = int(self.declared_parameters * (1 + rel))
        return (low, high)


ARCHITECTURES: dict[str, ArchitectureSpec] = {
    "unet1": ArchitectureSpec("unet1", 2_000_000, "compact U-Net, repeat upsampling"),
    "unet2": ArchitectureSpec("unet2", 17_500_000, "wide U-Net, batch norm, transposed convs"),
    "acnn": ArchitectureSpec("acnn", 2_200_000, "U-Net backbone + autoencoder shape prior"),
    "shg": ArchitectureSpec("shg", 4_500_000, "three stacked hourglass stages, deep supervision"),
    "unetpp": ArchitectureSpec("unetpp", 1_100_000, "U-Net++ with dense skip connections"),
    "autoencoder": ArchitectureSpec("autoencoder", None, "4-class mask autoencoder, code size 32"),
}


def parameter_count(model: nn.Module) -> int:
    """Total number of parameters (trainable or not)."""
    return sum(p.numel() for p in model.parameters())


def build(name: str) -> nn.Module:
    """Instantiate a freshly initialized architecture by name.

    Raises
    ------
    UnknownArchitectureError
        ``name`` is not one of :data:`ARCHITECTURES`.
    """
    factory = {
        "unet1": UNet1,
        "unet2": UNet2,
        "acnn": ACNN,
        "shg": StackedHourglass,
        "unetpp": UNetPP,
        "autoencoder": Autoencoder,
    }.get(name)
    if factory is None:
        raise UnknownArchitectureError(
            f"unknown architecture {name!r}; expected one of {sorted(ARCHITECTURES)}"
        )
    return factory()


def _conv_stack(channels: tuple[int, ...], activation: type[nn.Module] = nn.ReLU) -> nn.Sequential:
    """3x3 same-padding convolutions with an activation after each."""
    layers: list[nn.Module] = []
    for cin, cout in zip(channels, channels[1:]):
        layers.append(nn.Conv2d(cin, cout, kernel_size=3, padding=1))
        layers.append(activation())
    return nn.Sequential(*layers)


def _bn_conv_stack(channels: tuple[int, ...]) -> nn.Sequential:
    """3x3 convolutions, each followed by batch norm then ReLU."""
    layers: list[nn.Module] = []
    for cin, cout in zip(channels, channels[1:]):
        layers.append(nn.Conv2d(cin, cout, kernel_size=3, padding=1))
        layers.append(nn.BatchNorm2d(cout))
        layers.append(nn.ReLU())
    return nn.Sequential(*layers)


def _check_input(x: torch.Tensor) -> None:
    if x.ndim != 4 or x.shape[1] != 1:
        raise ValueError(f"expected (N, 1, H, W) input, got {tuple(x.shape)}")
    if x.shape[-2] % 32 or x.shape[-1] % 32:
        raise ValueError(
            f"spatial size must be divisible by 32, got {tuple(x.shape[-2:])}"
        )


class _SoftmaxSegmenter(nn.Module):
    """Common contract: ``forward`` returns per-pixel class probabilities."""

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x)
        return torch.softmax(self.logits(x), dim=1)


class UNet1(_SoftmaxSegmenter):
    """Compact U-Net; upsampling duplicates pixels (nearest 2x2 repeat)."""

    # (in, mid/out) per encoder level; the last entry is the bottleneck.
    _DOWN = ((1, 32), (32, 32), (32, 64), (64, 128), (128, 128))
    _BOTTOM = (128, 128)
    # (concat-in, out) per decoder level, top of the expansion path last.
    _UP = ((256, 128), (256, 128), (192, 64), (96, 32), (64, 16))

    def __init__(self) -> None:
        super().__init__()
        self.down = nn.ModuleList(
            _conv_stack((cin, cout, cout)) for cin, cout in self._DOWN
        )
        self.pool = nn.MaxPool2d(2)
        self.bottom = _conv_stack((self._BOTTOM[0], self._BOTTOM[1], self._BOTTOM[1]))
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")
        self.up = nn.ModuleList(_conv_stack((cin, cout, cout)) for cin, cout in self._UP)
        self.head = nn.Conv2d(self._UP[-1][1], NUM_CLASSES, kernel_size=1)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x)
        skips = []
        for block in self.down:
            x = block(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottom(x)
        for block, skip in zip(self.up, reversed(skips)):
            x = block(torch.cat([self.upsample(x), skip], dim=1))
        return self.head(x)


class UNet2(_SoftmaxSegmenter):
    """Wide U-Net with batch normalization and transposed-conv upsampling."""

    _WIDTHS = (48, 96, 192, 384)
    _BOTTOM = 768

    def __init__(self) -> None:
        super().__init__()
        widths = self._WIDTHS
        self.down = nn.ModuleList(
            _bn_conv_stack((cin, cout, cout))
            for cin, cout in zip((1,) + widths[:-1], widths)
        )
        self.pool = nn.MaxPool2d(2)
        self.bottom = _bn_conv_stack((widths[-1], self._BOTTOM, self._BOTTOM))
        ups = []
        blocks = []
        previous = self._BOTTOM
        for width in reversed(widths):
            ups.append(
                nn.Sequential(
                    nn.ConvTranspose2d(previous, width, kernel_size=2, stride=2),
                    nn.BatchNorm2d(width),
                    nn.ReLU(),
                )
            )
            blocks.append(_bn_conv_stack((2 * width, width, width)))
            previous = width
        self.up_transpose = nn.ModuleList(ups)
        self.up = nn.ModuleList(blocks)
        self.head = nn.Conv2d(widths[0], NUM_CLASSES, kernel_size=1)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x)
        skips = []
        for block in self.down:
            x = block(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottom(x)
        for transpose, block, skip in zip(self.up_transpose, self.up, reversed(skips)):
            x = block(torch.cat([transpose(x), skip], dim=1))
        return self.head(x)


class Autoencoder(nn.Module):
    """Mask autoencoder: ELU convolutions to a dense code of 32 values.

    Inputs are ``(N, 4, H, W)`` class probabilities (or one-hot masks).  The
    internal grid is 416x416 so that five stride-2 encoder steps reach the
    13x13 map flattened into the 169-unit dense layers; inputs and outputs
    are resampled bilinearly at the boundary, which preserves per-pixel
    probability sums.
    """

    _GRID = 416

    def __init__(self) -> None:
        super().__init__()
        enc: list[nn.Module] = []
        channels = ((NUM_CLASSES, 16), (16, 16), (16, 32), (32, 32), (32, 64), (64, 64))
        for index, (cin, cout) in enumerate(channels):
            stride = 2 if index < 5 else 1
            enc.append(nn.Conv2d(cin, cout, kernel_size=3, stride=stride, padding=1))
            enc.append(nn.ELU())
        enc.append(nn.Conv2d(64, 1, kernel_size=3, padding=1))
        enc.append(nn.ELU())
        enc.append(nn.Flatten())
        self.encoder = nn.Sequential(*enc)
        self.bottleneck = nn.Linear(13 * 13, 32)

        self.expand = nn.Sequential(nn.Linear(32, 13 * 13), nn.ELU())
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(1, 64, kernel_size=4, stride=2, padding=1),
            nn.ELU(),
            nn.ConvTranspose2d(64, 64, kernel_size=4, stride=2, padding=1),
            nn.ELU(),
            nn.Conv2d(64, 64, kernel_size=3, padding=1),
            nn.ELU(),
            nn.ConvTranspose2d(64, 32, kernel_size=4, stride=2, padding=1),
            nn.ELU(),
            nn.Conv2d(32, 32, kernel_size=3, padding=1),
            nn.ELU(),
            nn.ConvTranspose2d(32, 16, kernel_size=4, stride=2, padding=1),
            nn.ELU(),
            nn.Conv2d(16, 16, kernel_size=3, padding=1),
            nn.ELU(),
            nn.ConvTranspose2d(16, 16, kernel_size=4, stride=2, padding=1),
            nn.ELU(),
        )
        self.head = nn.Conv2d(16, NUM_CLASSES, kernel_size=3, padding=1)

    def encode(self, masks: torch.Tensor) -> torch.Tensor:
        """Map ``(N, 4, H, W)`` probability maps to ``(N, 32)`` codes."""
        if masks.ndim != 4 or masks.shape[1] != NUM_CLASSES:
            raise ValueError(
                f"expected (N, {NUM_CLASSES}, H, W) probability maps, "
                f"got {tuple(masks.shape)}"
            )
        grid = F.interpolate(
            masks, size=(self._GRID, self._GRID), mode="bilinear", align_corners=False
        )
        return self.bottleneck(self.encoder(grid))

    def decode(self, code: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
        """Reconstruct ``(N, 4, *size)`` probabilities from ``(N, 32)`` codes."""
        x = self.expand(code).reshape(-1, 1, 13, 13)
        logits = self.head(self.decoder(x))
        logits = F.interpolate(logits, size=size, mode="bilinear", align_corners=False)
        return torch.softmax(logits, dim=1)

    def forward(self, masks: torch.Tensor) -> torch.Tensor:
        return self.decode(self.encode(masks), size=masks.shape[-2:])


class ACNN(_SoftmaxSegmenter):
    """Anatomically constrained network: backbone + shape prior.

    ``forward`` is the segmentation backbone alone; the training loss adds a
    code-consistency term computed through :attr:`shape_prior`.
    """

    def __init__(self) -> None:
        super().__init__()
        self.backbone = UNet1()
        self.shape_prior = Autoencoder()

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone.logits(x)

    def code(self, probabilities: torch.Tensor) -> torch.Tensor:
        """The shape-prior code of a ``(N, 4, H, W)`` probability map."""
        return self.shape_prior.encode(probabilities)


class _Hourglass(nn.Module):
    """One encoder-decoder stage of the stacked hourglass."""

    def __init__(self, widths: tuple[int, int, int]) -> None:
        super().__init__()
        w0, w1, w2 = widths
        self.enc1 = _conv_stack((w0, w0, w0))
        self.enc2 = _conv_stack((w0, w1, w1))
        self.bottom = _conv_stack((w1, w2, w2))
        self.dec2 = _conv_stack((w2 + w1, w1, w1))
        self.dec1 = _conv_stack((w1 + w0, w0, w0))
        self.pool = nn.MaxPool2d(2)
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skip1 = self.enc1(x)
        skip2 = self.enc2(self.pool(skip1))
        x = self.bottom(self.pool(skip2))
        x = self.dec2(torch.cat([self.upsample(x), skip2], dim=1))
        x = self.dec1(torch.cat([self.upsample(x), skip1], dim=1))
        return x


class StackedHourglass(_SoftmaxSegmenter):
    """Three successive hourglass stages with deep supervision.

    Every stage emits its own 4-class prediction (``forward_stages``); the
    network's output is the final stage's prediction.  Between stages the
    features and the intermediate prediction are remapped by 1x1
    convolutions and added back to the stage input.
    """

    STAGES = 3
    _WIDTHS = (56, 112, 224)

    def __init__(self) -> None:
        super().__init__()
        w0 = self._WIDTHS[0]
        self.stem = _conv_stack((1, w0, w0))
        self.stages = nn.ModuleList(_Hourglass(self._WIDTHS) for _ in range(self.STAGES))
        self.heads = nn.ModuleList(
            nn.Conv2d(w0, NUM_CLASSES, kernel_size=1) for _ in range(self.STAGES)
        )
        self.feature_remap = nn.ModuleList(
            nn.Conv2d(w0, w0, kernel_size=1) for _ in range(self.STAGES - 1)
        )
        self.prediction_remap = nn.ModuleList(
            nn.Conv2d(NUM_CLASSES, w0, kernel_size=1) for _ in range(self.STAGES - 1)
        )

    def stage_logits(self, x: torch.Tensor) -> list[torch.Tensor]:
        _check_input(x)
        x = self.stem(x)
        outputs = []
        for index, (stage, head) in enumerate(zip(self.stages, self.heads)):
            features = stage(x)
            prediction = head(features)
            outputs.append(prediction)
            if index < self.STAGES - 1:
                x = x + self.feature_remap[index](features)
                x = x + self.prediction_remap[index](prediction)
        return outputs

    def forward_stages(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Per-stage probability maps, in stage order."""
        return [torch.softmax(stage, dim=1) for stage in self.stage_logits(x)]

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        return self.stage_logits(x)[-1]


class UNetPP(_SoftmaxSegmenter):
    """U-Net++: nested nodes with dense skip connections.

    Node ``X(i, j)`` consumes every same-level predecessor ``X(i, 0..j-1)``
    plus the upsampled output of ``X(i+1, j-1)``.  The head reads the
    topmost, most-nested node.
    """

    _WIDTHS = (22, 44, 88, 176)

    def __init__(self) -> None:
        super().__init__()
        widths = self._WIDTHS
        depth = len(widths)
        self.pool = nn.MaxPool2d(2)
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")
        self.nodes = nn.ModuleDict()
        for level in range(depth):
            for column in range(depth - level):
                if column == 0:
                    cin = 1 if level == 0 else widths[level - 1]
                else:
                    cin = column * widths[level] + widths[level + 1]
                self.nodes[f"x{level}{column}"] = _conv_stack(
                    (cin, widths[level], widths[level])
                )
        self.head = nn.Conv2d(widths[0], NUM_CLASSES, kernel_size=1)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x)
        depth = len(self._WIDTHS)
        grid: dict[tuple[int, int], torch.Tensor] = {}
        for level in range(depth):
            source = x if level == 0 else self.pool(grid[(level - 1, 0)])
            grid[(level, 0)] = self.nodes[f"x{level}0"](source)
        for column in range(1, depth):
            for level in range(depth - column):
                below = self.upsample(grid[(level + 1, column - 1)])
                same = [grid[(level, j)] for j in range(column)]
                grid[(level, column)] = self.nodes[f"x{level}{column}"](
                    torch.cat(same + [below], dim=1)
                )
        return self.head(grid[(0, depth - 1)])
