"""Combining the K hypotheses into the stage-1 restoration.

Two strategies: `fuse_direct` weights hypotheses by the raw degradation
maps (normalized to sum to one per pixel), `LearnedFusion` maps the maps
through a small conv net and softmaxes the result. Both produce per-pixel
convex combinations, so the output stays inside the hypothesis envelope.
"""

from __future__ import annotations

import warnings

import torch
import torch.nn as nn

from .blocks import ConvBlock
from .core import BadShapeError, DegenerateMapsWarning, K_MAPS, ModelConfig, Tensor

FUSION_HIDDEN = 32
_NORM_EPS = 1e-6


def _check_pair(maps: Tensor, hypotheses: Tensor) -> None:
    if maps.dim() != 4 or maps.shape[1] != K_MAPS:
        raise BadShapeError(f"maps must be BxKxHxW, got {tuple(maps.shape)}")
    if hypotheses.dim() != 5 or hypotheses.shape[1] != K_MAPS or hypotheses.shape[2] != 3:
        raise BadShapeError(
            f"hypotheses must be BxKx3xHxW, got {tuple(hypotheses.shape)}"
        )
    if maps.shape[0] != hypotheses.shape[0] or maps.shape[-2:] != hypotheses.shape[-2:]:
        raise BadShapeError("maps and hypotheses disagree on batch or spatial size")


def fuse_direct(maps: Tensor, hypotheses: Tensor) -> Tensor:
    """Weight each hypothesis by its normalized degradation map.

    All-zero maps have no signal to weight; the result collapses toward
    zero and a DegenerateMapsWarning is raised.
    """
    _check_pair(maps, hypotheses)
    total = maps.sum(dim=1, keepdim=True)
    if bool((maps.detach().amax(dim=(1, 2, 3)) == 0).any()):
        warnings.warn(
            "all degradation maps are zero; direct fusion output is degenerate",
            DegenerateMapsWarning,
        )
    weights = maps / (total + _NORM_EPS)
    return (weights.unsqueeze(2) * hypotheses).sum(dim=1)


class LearnedFusion(nn.Module):
    """Softmax fusion weights from a small conv net over the maps.

    Two 3x3 convs (K -> hidden -> K) with an input-to-logits residual
    connection; softmax over the K channel makes the weights a per-pixel
    convex combination.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.body = ConvBlock(K_MAPS, FUSION_HIDDEN, slope=cfg.negative_slope)
        self.head = nn.Conv2d(FUSION_HIDDEN, K_MAPS, 3, padding=1)

    def weights(self, maps: Tensor) -> Tensor:
        logits = self.head(self.body(maps)) + maps
        return torch.softmax(logits, dim=1)

    def forward(self, maps: Tensor, hypotheses: Tensor) -> tuple[Tensor, Tensor]:
        _check_pair(maps, hypotheses)
        w = self.weights(maps)
        fused = (w.unsqueeze(2) * hypotheses).sum(dim=1)
        return fused, w
