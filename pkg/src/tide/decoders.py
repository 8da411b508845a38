"""Specialized decoders, one per degradation type.

All four share the same skeleton: walk the encoder hierarchy from the
bottleneck back to full resolution, at each level bilinearly upsampling,
concatenating the skip features, recalibrating the channel count, and
applying a degradation-specific processing block. A final conv plus a
rescaled tanh produces a restoration hypothesis in [0, 1].
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import ConvBlock, GlobalContext, ResidualBlock, ResidualBranch
from .core import BadParamsError, BadShapeError, DEGRADATION_KINDS, ModelConfig, Tensor


def color_attention(ch: int) -> GlobalContext:
    """Channel attention for the color decoder; reduction grows with width."""
    return GlobalContext(ch, reduction=max(4, ch // 16))


class DetailEnhanceBlock(nn.Module):
    """x + sum of parallel residual branches, one extraction per scale."""

    def __init__(self, ch: int, branches: int, slope: float):
        super().__init__()
        self.branches = nn.ModuleList(
            ResidualBranch(ch, slope) for _ in range(branches)
        )

    def forward(self, x: Tensor) -> Tensor:
        return x + sum(branch(x) for branch in self.branches)


class DenoiseBlock(nn.Module):
    """Grouped spatial filtering then pointwise mixing: 1x1(gconv3x3(phi(x)))."""

    def __init__(self, ch: int, slope: float):
        super().__init__()
        groups = max(1, min(ch // 8, ch))
        self.pre = ConvBlock(ch, ch, slope=slope)
        self.grouped = nn.Conv2d(ch, ch, 3, padding=1, groups=groups)
        self.mix = nn.Conv2d(ch, ch, 1)

    def forward(self, x: Tensor) -> Tensor:
        return self.mix(self.grouped(self.pre(x)))


def _make_special(kind: str, ch: int, cfg: ModelConfig) -> nn.Module:
    if kind == "color":
        return color_attention(ch)
    if kind == "contrast":
        return ResidualBlock(ch, cfg.negative_slope)
    if kind == "detail":
        return DetailEnhanceBlock(ch, cfg.detail_branches, cfg.negative_slope)
    if kind == "noise":
        return DenoiseBlock(ch, cfg.negative_slope)
    raise BadParamsError(f"unknown decoder kind {kind!r}; expected one of {DEGRADATION_KINDS}")


class SpecializedDecoder(nn.Module):
    """One restoration hypothesis from the shared feature hierarchy."""

    def __init__(self, cfg: ModelConfig, kind: str):
        super().__init__()
        cfg.validate()
        if kind not in DEGRADATION_KINDS:
            raise BadParamsError(
                f"unknown decoder kind {kind!r}; expected one of {DEGRADATION_KINDS}"
            )
        self.kind = kind
        chans = cfg.encoder_channels()
        calib, special = [], []
        # Level i consumes the upsampled level-(i+1) features plus the skip.
        for i in range(cfg.n_down - 1, -1, -1):
            calib.append(
                ConvBlock(chans[i + 1] + chans[i], chans[i], slope=cfg.negative_slope)
            )
            special.append(_make_special(kind, chans[i], cfg))
        self.calib = nn.ModuleList(calib)
        self.special = nn.ModuleList(special)
        self.out_conv = nn.Conv2d(chans[0], 3, 3, padding=1)
        self.n_levels = cfg.n_down

    def forward(self, feats: list[Tensor]) -> Tensor:
        if len(feats) != self.n_levels + 1:
            raise BadShapeError(
                f"expected {self.n_levels + 1} feature levels, got {len(feats)}"
            )
        x = feats[-1]
        for step, i in enumerate(range(self.n_levels - 1, -1, -1)):
            x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
            x = torch.cat([x, feats[i]], dim=1)
            x = self.calib[step](x)
            x = self.special[step](x)
        x = self.out_conv(x)
        return (torch.tanh(x) + 1.0) / 2.0
