"""Shared convolutional encoder feeding the specialized decoders."""

from __future__ import annotations

import torch.nn as nn

from .blocks import ConvBlock, ResidualBranch
from .core import BadShapeError, ModelConfig, Tensor


class Encoder(nn.Module):
    """Strided conv pyramid with a parallel-residual bottleneck.

    Produces one feature map per level 0..n_down; level 0 keeps the input
    resolution, each following level halves it. Channel width doubles per
    level up to the configured cap. The deepest features additionally get
    the sum of `bottleneck_blocks` residual branches added on.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        chans = cfg.encoder_channels()
        stages = [ConvBlock(3, chans[0], stride=1, slope=cfg.negative_slope)]
        for cin, cout in zip(chans, chans[1:]):
            stages.append(ConvBlock(cin, cout, stride=2, slope=cfg.negative_slope))
        self.stages = nn.ModuleList(stages)
        self.bottleneck = nn.ModuleList(
            ResidualBranch(chans[-1], cfg.negative_slope)
            for _ in range(cfg.bottleneck_blocks)
        )
        self.divisor = cfg.divisor
        self.channels = chans

    def forward(self, img: Tensor) -> list[Tensor]:
        if img.dim() != 4 or img.shape[1] != 3:
            raise BadShapeError(f"encoder expects Bx3xHxW, got {tuple(img.shape)}")
        h, w = img.shape[-2], img.shape[-1]
        if h == 0 or w == 0 or h % self.divisor or w % self.divisor:
            raise BadShapeError(
                f"spatial size {h}x{w} must be a positive multiple of {self.divisor}"
            )
        feats = []
        x = img
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        deep = feats[-1]
        feats[-1] = deep + sum(branch(deep) for branch in self.bottleneck)
        return feats
