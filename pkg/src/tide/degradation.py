"""Degradation map estimators for both stages.

Stage 1 predicts K per-pixel severity maps from the raw image; stage 2
predicts K residual-degradation maps from the raw image and the stage-1
output, guided by an attention signal computed from their difference.
All maps are in [0, 1].
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import ConvBlock, GlobalContext
from .core import BadShapeError, K_MAPS, ModelConfig, Tensor

# Both estimators downsample twice: enough receptive field for per-pixel
# severity at a fraction of the backbone's cost.
DOWN_STEPS = 2

# Residual estimator trunk width and attention-net hidden width.
RESIDUAL_CHANNELS = 8
ATTENTION_HIDDEN = 8


def difference_map(img: Tensor, initial: Tensor) -> Tensor:
    """Per-channel absolute difference |img - initial|."""
    if img.shape != initial.shape:
        raise BadShapeError(
            f"difference_map: shapes differ {tuple(img.shape)} vs {tuple(initial.shape)}"
        )
    return (img - initial).abs()


class _EncoderDecoder(nn.Module):
    """Small U-shaped trunk: 2 strided steps down, concat skips back up.

    Returns full-resolution features at `base` channels.
    """

    def __init__(self, in_ch: int, base: int, slope: float, context: bool):
        super().__init__()
        c0, c1, c2 = base, base * 2, base * 4
        self.stem = ConvBlock(in_ch, c0, slope=slope)
        self.down1 = ConvBlock(c0, c1, stride=2, slope=slope)
        self.down2 = ConvBlock(c1, c2, stride=2, slope=slope)
        self.context = GlobalContext(c2) if context else None
        # The global-context output is concatenated with the deep features,
        # doubling the channel count entering the first upsampling block.
        deep_ch = c2 * 2 if context else c2
        self.up1 = ConvBlock(deep_ch + c1, c1, slope=slope)
        self.up2 = ConvBlock(c1 + c0, c0, slope=slope)
        self.out_channels = c0

    def forward(self, x: Tensor) -> Tensor:
        h, w = x.shape[-2], x.shape[-1]
        if h % (2 ** DOWN_STEPS) or w % (2 ** DOWN_STEPS):
            raise BadShapeError(
                f"estimator input {h}x{w} must be divisible by {2 ** DOWN_STEPS}"
            )
        z0 = self.stem(x)
        z1 = self.down1(z0)
        z2 = self.down2(z1)
        if self.context is not None:
            z2 = torch.cat([z2, self.context(z2)], dim=1)
        u = F.interpolate(z2, scale_factor=2, mode="bilinear", align_corners=False)
        u = self.up1(torch.cat([u, z1], dim=1))
        u = F.interpolate(u, scale_factor=2, mode="bilinear", align_corners=False)
        u = self.up2(torch.cat([u, z0], dim=1))
        return u


class DegradationEstimator(nn.Module):
    """Stage-1 estimator D: image -> K degradation maps in [0, 1]."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.trunk = _EncoderDecoder(
            3, cfg.deg_channels, cfg.negative_slope, context=True
        )
        self.proj = nn.Conv2d(self.trunk.out_channels, K_MAPS, 1)

    def forward(self, img: Tensor) -> Tensor:
        if img.dim() != 4 or img.shape[1] != 3:
            raise BadShapeError(f"estimator expects Bx3xHxW, got {tuple(img.shape)}")
        return torch.sigmoid(self.proj(self.trunk(img)))


class ResidualDegradationEstimator(nn.Module):
    """Stage-2 estimator: (image, initial) -> K residual maps in [0, 1].

    Internal features are modulated by (1 + alpha * f_d(|img - initial|))
    before the 1x1 projection; alpha starts at 0 so the attention path is
    inert until trained. f_d ends in a plain conv, so with a zero output
    bias it maps a zero difference to an exactly neutral modulation.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        slope = cfg.negative_slope
        self.features = _EncoderDecoder(6, RESIDUAL_CHANNELS, slope, context=False)
        self.attention = nn.Sequential(
            ConvBlock(3, ATTENTION_HIDDEN, slope=slope),
            nn.Conv2d(ATTENTION_HIDDEN, 1, 3, padding=1),
        )
        self.proj = nn.Conv2d(self.features.out_channels, K_MAPS, 1)
        self.alpha = nn.Parameter(torch.tensor(0.0))

    def forward(self, img: Tensor, initial: Tensor) -> Tensor:
        if img.shape != initial.shape:
            raise BadShapeError(
                f"shapes differ: {tuple(img.shape)} vs {tuple(initial.shape)}"
            )
        if img.dim() != 4 or img.shape[1] != 3:
            raise BadShapeError(f"expected Bx3xHxW, got {tuple(img.shape)}")
        a = self.attention(difference_map(img, initial))
        z = self.features(torch.cat([img, initial], dim=1))
        z = z * (1.0 + self.alpha * a)
        return torch.sigmoid(self.proj(z))
