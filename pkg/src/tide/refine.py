"""Stage-2 refinement: bounded expert corrections behind a safety gate.

Each expert reads the raw image and the stage-1 restoration, proposes a
correction bounded by tanh and a learned per-expert scale, and the
corrections are blended with softmax weights driven by the residual
degradation maps. A content-dependent gate mask and a learned global
scale throttle the blended correction before it is added to the stage-1
output and clamped.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .blocks import ConvBlock, ResidualBlock
from .core import (
    BadParamsError,
    BadShapeError,
    DEGRADATION_KINDS,
    K_MAPS,
    ModelConfig,
    Tensor,
)
from .degradation import ResidualDegradationEstimator

GATE_HIDDEN = 16
CORRECTION_FUSE_HIDDEN = 16
EXPERT_SCALE_INIT = 0.1
GATE_SCALE_INIT = 0.0


class DetailCorrection(nn.Module):
    """Cross-linked conv stack; phi2 is evaluated twice with shared weights."""

    def __init__(self, ch: int, slope: float):
        super().__init__()
        self.phi1 = ConvBlock(ch, ch, slope=slope)
        self.phi2 = ConvBlock(ch, ch, slope=slope)
        self.phi3 = ConvBlock(ch, ch, slope=slope)
        self.proj = nn.Conv2d(ch, 3, 1)

    def forward(self, x: Tensor) -> Tensor:
        a = self.phi1(x)
        b = self.phi2(a + x)
        c = self.phi3(b + a)
        return self.proj(c + self.phi2(a))


def _make_head(kind: str, ch: int, slope: float) -> nn.Module:
    if kind == "color":
        return nn.Sequential(ConvBlock(ch, ch, slope=slope), nn.Conv2d(ch, 3, 3, padding=1))
    if kind == "contrast":
        return nn.Sequential(
            ConvBlock(ch, ch, slope=slope),
            ResidualBlock(ch, slope),
            nn.Conv2d(ch, 3, 3, padding=1),
        )
    if kind == "detail":
        return DetailCorrection(ch, slope)
    if kind == "noise":
        groups = max(1, min(ch // 4, ch))
        return nn.Sequential(
            ConvBlock(ch, ch, slope=slope),
            nn.Conv2d(ch, ch, 3, padding=1, groups=groups),
            nn.Conv2d(ch, 3, 1),
        )
    raise BadParamsError(f"unknown expert kind {kind!r}; expected one of {DEGRADATION_KINDS}")


class RefinementExpert(nn.Module):
    """tanh-bounded correction scaled by sigmoid of a learned scalar.

    |output| <= sigmoid(scale) by construction, so a freshly built expert
    (scale = 0.1) can never push a pixel further than ~0.525.
    """

    def __init__(self, cfg: ModelConfig, kind: str):
        super().__init__()
        cfg.validate()
        if kind not in DEGRADATION_KINDS:
            raise BadParamsError(
                f"unknown expert kind {kind!r}; expected one of {DEGRADATION_KINDS}"
            )
        self.kind = kind
        ch = cfg.refine_channels
        slope = cfg.negative_slope
        self.stem = ConvBlock(6, ch, slope=slope)
        self.res1 = ResidualBlock(ch, slope)
        self.res2 = ResidualBlock(ch, slope)
        self.head = _make_head(kind, ch, slope)
        self.scale = nn.Parameter(torch.tensor(EXPERT_SCALE_INIT))

    def forward(self, img: Tensor, initial: Tensor) -> Tensor:
        if img.shape != initial.shape:
            raise BadShapeError(
                f"shapes differ: {tuple(img.shape)} vs {tuple(initial.shape)}"
            )
        x = self.stem(torch.cat([img, initial], dim=1))
        x = self.res1(x)
        x = self.res2(x)
        return torch.tanh(self.head(x)) * torch.sigmoid(self.scale)


class SafetyGate(nn.Module):
    """Per-pixel mask in [0, 1] from the stage-1 output, plus a global scale."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.body = nn.Sequential(
            ConvBlock(3, GATE_HIDDEN, slope=cfg.negative_slope),
            nn.Conv2d(GATE_HIDDEN, 1, 3, padding=1),
        )
        self.scale = nn.Parameter(torch.tensor(GATE_SCALE_INIT))

    def forward(self, initial: Tensor) -> Tensor:
        return torch.sigmoid(self.body(initial))


class CorrectionFusion(nn.Module):
    """Softmax blend weights for the K corrections from the residual maps."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.body = nn.Sequential(
            ConvBlock(K_MAPS, CORRECTION_FUSE_HIDDEN, slope=cfg.negative_slope),
            nn.Conv2d(CORRECTION_FUSE_HIDDEN, K_MAPS, 3, padding=1),
        )

    def forward(self, residual_maps: Tensor) -> Tensor:
        return torch.softmax(self.body(residual_maps), dim=1)


class Refiner(nn.Module):
    """Full stage 2: residual maps, experts, blending, gating, clamping."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.estimator = ResidualDegradationEstimator(cfg)
        self.experts = nn.ModuleDict(
            {kind: RefinementExpert(cfg, kind) for kind in DEGRADATION_KINDS}
        )
        self.gate = SafetyGate(cfg)
        self.fusion = CorrectionFusion(cfg)

    def forward(self, img: Tensor, initial: Tensor, gate_scale: float = 1.0) -> dict:
        """Run stage 2. `gate_scale` is a test hook that multiplies the final
        correction; the default 1.0 leaves the computation untouched."""
        residual_maps = self.estimator(img, initial)
        corrections = torch.stack(
            [self.experts[kind](img, initial) for kind in DEGRADATION_KINDS], dim=1
        )
        weights = self.fusion(residual_maps)
        blended = (weights.unsqueeze(2) * corrections).sum(dim=1)
        mask = self.gate(initial)
        correction = blended * mask * torch.sigmoid(self.gate.scale)
        if gate_scale != 1.0:
            correction = correction * gate_scale
        final = (initial + correction).clamp(0.0, 1.0)
        return {
            "final": final,
            "residual_maps": residual_maps,
            "corrections": corrections,
            "weights": weights,
            "gate": mask,
            "correction": correction,
        }

    def expert_scales(self) -> Tensor:
        return torch.stack(
            [self.experts[kind].scale.detach() for kind in DEGRADATION_KINDS]
        )
