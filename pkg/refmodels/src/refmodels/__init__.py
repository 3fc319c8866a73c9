"""Reference neural networks for 2D echocardiographic segmentation.

The package builds the published model family (``build``), trains toy
instances deterministically on synthetic phantoms (``train_toy``), and
exports predicted label masks in the benchmark engine's file formats
(``predict_and_export``) so they can be scored with its CLI.
"""

from ._version import __version__
from .errors import (
    FormatError,
    RefModelsError,
    TrainingDivergedError,
    UnknownArchitectureError,
)
from .export import predict_and_export, predict_case
from .formats import GrayImage, atomic_write_image, read_image, write_image
from .losses import (
    acnn_loss,
    cross_entropy_loss,
    deep_supervision_loss,
    hard_dice,
    model_loss,
    one_hot,
    soft_dice_loss,
)
from .models import (
    ACNN,
    ARCHITECTURES,
    NUM_CLASSES,
    ArchitectureSpec,
    Autoencoder,
    StackedHourglass,
    UNet1,
    UNet2,
    UNetPP,
    build,
    parameter_count,
)
from .phantoms import CASE_NAMES, Phantom, make_phantom, make_phantom_set, manifest_csv
from .preprocess import INPUT_SIZE, preprocess
from .training import (
    ToyTrainResult,
    TrainingConfig,
    default_config,
    load_checkpoint,
    save_checkpoint,
    train_toy,
)

__all__ = [
    "__version__",
    "RefModelsError",
    "UnknownArchitectureError",
    "FormatError",
    "TrainingDivergedError",
    "GrayImage",
    "read_image",
    "write_image",
    "atomic_write_image",
    "Phantom",
    "CASE_NAMES",
    "make_phantom",
    "make_phantom_set",
    "manifest_csv",
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
    "one_hot",
    "soft_dice_loss",
    "cross_entropy_loss",
    "deep_supervision_loss",
    "acnn_loss",
    "model_loss",
    "hard_dice",
    "INPUT_SIZE",
    "preprocess",
    "TrainingConfig",
    "ToyTrainResult",
    "default_config",
    "train_toy",
    "save_checkpoint",
    "load_checkpoint",
    "predict_case",
    "predict_and_export",
]
