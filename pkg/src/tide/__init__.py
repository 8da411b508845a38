"""Two-stage underwater image restoration.

Stage 1 estimates per-pixel degradation maps, decodes four specialized
restoration hypotheses from a shared encoder, and fuses them with learned
softmax weights. Stage 2 adds bounded expert corrections behind a safety
gate so refinement can sharpen results but never wreck them.
"""

from .baselines import apply_baseline
from .checkpoint import Checkpoint
from .core import (
    DEGRADATION_KINDS,
    LossWeights,
    ModelConfig,
    RestorationResult,
    TideError,
)
from .metrics import evaluate_pairs, psnr, ssim, uicm, uiconm, uiqm, uism
from .model import TideModel
from .simulate import DegradeParams, degrade, make_dataset, make_pairs
from .training import (
    TrainConfig,
    count_parameters,
    restore,
    train_base,
    train_combined,
    train_refine,
)

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "DEGRADATION_KINDS",
    "DegradeParams",
    "LossWeights",
    "ModelConfig",
    "RestorationResult",
    "TideError",
    "TideModel",
    "TrainConfig",
    "apply_baseline",
    "count_parameters",
    "degrade",
    "evaluate_pairs",
    "make_dataset",
    "make_pairs",
    "psnr",
    "restore",
    "ssim",
    "train_base",
    "train_combined",
    "train_refine",
    "uicm",
    "uiconm",
    "uiqm",
    "uism",
]
