"""Shared types, configuration, and validation for the restoration pipeline.

Images are channels-first float arrays with values in [0, 1]. The network
side of the library works on torch tensors; metrics, baselines, and the
simulator work on numpy arrays with the same layout.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import torch

Tensor = torch.Tensor
Array = np.ndarray

# The four degradation types the pipeline estimates and corrects.
DEGRADATION_KINDS = ("color", "contrast", "detail", "noise")
K_MAPS = len(DEGRADATION_KINDS)


class TideError(Exception):
    """Base class for library errors."""


class BadShapeError(TideError):
    pass


class OutOfRangeError(TideError):
    pass


class BadParamsError(TideError):
    pass


class EmptyDatasetError(TideError):
    pass


class ConfigMismatchError(TideError):
    pass


class PhaseMismatchError(TideError):
    pass


class CheckpointError(TideError):
    pass


class MissingPairError(TideError):
    pass


class UnreadableImageError(TideError):
    pass


class UnsupportedMetricError(TideError):
    pass


class UnknownMethodError(TideError):
    pass


class ConfigKeyError(TideError):
    pass


class DegenerateMapsWarning(UserWarning):
    """All degradation maps are zero; direct fusion has no signal to weight."""


class ZeroVectorWarning(UserWarning):
    """A flattened hypothesis is the zero vector; its cosine terms count as 0."""


class CropWarning(UserWarning):
    """Input was center-cropped to satisfy the encoder's divisibility rule."""


def validate_image(img, name: str = "image"):
    """Check 3xHxW layout, finiteness, and [0, 1] range. Returns the input.

    Accepts torch tensors and numpy arrays.
    """
    shape = tuple(img.shape)
    if len(shape) != 3 or shape[0] != 3 or shape[1] < 1 or shape[2] < 1:
        raise BadShapeError(f"{name}: expected 3xHxW with H,W >= 1, got {shape}")
    if isinstance(img, torch.Tensor):
        finite = bool(torch.isfinite(img).all())
    else:
        finite = bool(np.isfinite(np.asarray(img)).all())
    if not finite:
        raise OutOfRangeError(f"{name}: contains NaN or infinite values")
    lo, hi = float(img.min()), float(img.max())
    if lo < 0.0 or hi > 1.0:
        raise OutOfRangeError(
            f"{name}: values outside [0, 1] (min {lo:.6g}, max {hi:.6g})"
        )
    return img


def clamp01(x):
    """Elementwise clamp to [0, 1]; works on torch tensors and numpy arrays."""
    if isinstance(x, torch.Tensor):
        return x.clamp(0.0, 1.0)
    return np.clip(x, 0.0, 1.0)


def to_tensor(img) -> Tensor:
    """Numpy 3xHxW -> float32 torch tensor (no copy if already a tensor)."""
    if isinstance(img, torch.Tensor):
        return img.float()
    return torch.from_numpy(np.ascontiguousarray(img)).float()


def to_array(img) -> Array:
    """Torch tensor -> float32 numpy array."""
    if isinstance(img, torch.Tensor):
        return img.detach().cpu().numpy().astype(np.float32)
    return np.asarray(img, dtype=np.float32)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    The default (toy) preset keeps desk-scale runs fast; `full()` is the
    production-size network. Channel counts must be multiples of 8 so the
    grouped convolutions inside the denoise paths divide evenly.
    """

    n_down: int = 3
    base_channels: int = 16
    max_channels: int = 64
    deg_channels: int = 8
    refine_channels: int = 16
    bottleneck_blocks: int = 2
    detail_branches: int = 2
    negative_slope: float = 0.2

    @classmethod
    def toy(cls) -> "ModelConfig":
        return cls()

    @classmethod
    def full(cls) -> "ModelConfig":
        return cls(
            n_down=5,
            base_channels=64,
            max_channels=512,
            deg_channels=32,
            refine_channels=64,
        )

    def validate(self) -> "ModelConfig":
        if self.n_down < 1:
            raise BadParamsError("n_down must be >= 1")
        if self.base_channels < 8 or self.base_channels % 8:
            raise BadParamsError("base_channels must be a positive multiple of 8")
        if self.max_channels < self.base_channels or self.max_channels % 8:
            raise BadParamsError(
                "max_channels must be a multiple of 8 and >= base_channels"
            )
        if self.deg_channels < 4:
            raise BadParamsError("deg_channels must be >= 4")
        if self.refine_channels < 4 or self.refine_channels % 4:
            raise BadParamsError("refine_channels must be a positive multiple of 4")
        if self.bottleneck_blocks < 1:
            raise BadParamsError("bottleneck_blocks must be >= 1")
        if self.detail_branches < 1:
            raise BadParamsError("detail_branches must be >= 1")
        if not 0.0 < self.negative_slope < 1.0:
            raise BadParamsError("negative_slope must be in (0, 1)")
        return self

    @property
    def divisor(self) -> int:
        """Input spatial sizes must be divisible by this."""
        return 2 ** self.n_down

    def encoder_channels(self) -> list[int]:
        """Channel width per encoder level, doubling up to the cap."""
        return [
            min(self.base_channels * 2 ** i, self.max_channels)
            for i in range(self.n_down + 1)
        ]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LossWeights:
    """Scalar weights for the stage losses."""

    l1: float = 1.0
    ssim: float = 0.1
    perceptual: float = 0.1
    diversity: float = 0.05
    consistency: float = 0.1
    aux: float = 0.1
    magnitude: float = 0.1
    improve: float = 0.5
    base_combined: float = 0.7
    refine_combined: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RestorationResult:
    """Everything the two-stage pipeline produces for one image.

    Stage-2 fields are None for checkpoints trained through stage 1 only,
    in which case `final` is a bitwise copy of `initial`.
    """

    initial: Tensor          # 3xHxW, stage-1 restoration
    final: Tensor            # 3xHxW, after the gated correction
    maps: Tensor             # Kx H x W degradation maps
    hypotheses: Tensor       # Kx3xHxW specialized hypotheses
    fusion_weights: Tensor   # KxHxW softmax fusion weights
    residual_maps: Tensor | None = None   # KxHxW stage-2 residual maps
    corrections: Tensor | None = None     # Kx3xHxW expert corrections
    correction: Tensor | None = None      # 3xHxW fused, gated correction
    gate: Tensor | None = None            # 1xHxW safety-gate mask
    expert_scales: Tensor | None = None   # K raw expert scale parameters
    global_scale: float | None = None     # raw global gate scale parameter
    alpha: float | None = None            # residual-attention strength
