"""Model assembly: stage-1 base restorer and the optional stage-2 refiner."""

from __future__ import annotations

import torch
import torch.nn as nn

from .backbone import Encoder
from .core import DEGRADATION_KINDS, ModelConfig, RestorationResult, Tensor
from .decoders import SpecializedDecoder
from .degradation import DegradationEstimator
from .fusion import LearnedFusion
from .refine import Refiner


class BaseRestorer(nn.Module):
    """Encoder + degradation estimator + K decoders + learned fusion."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.encoder = Encoder(cfg)
        self.estimator = DegradationEstimator(cfg)
        self.decoders = nn.ModuleDict(
            {kind: SpecializedDecoder(cfg, kind) for kind in DEGRADATION_KINDS}
        )
        self.fusion = LearnedFusion(cfg)

    def forward(self, img: Tensor) -> dict:
        feats = self.encoder(img)
        maps = self.estimator(img)
        hypotheses = torch.stack(
            [self.decoders[kind](feats) for kind in DEGRADATION_KINDS], dim=1
        )
        initial, weights = self.fusion(maps, hypotheses)
        return {
            "initial": initial,
            "maps": maps,
            "hypotheses": hypotheses,
            "weights": weights,
        }


class TideModel(nn.Module):
    """Two-stage pipeline; stage 2 can be skipped for base-only checkpoints."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg.validate()
        self.base = BaseRestorer(cfg)
        self.refine = Refiner(cfg)

    def forward(self, img: Tensor, with_refine: bool = True, gate_scale: float = 1.0) -> dict:
        out = self.base(img)
        if with_refine:
            out.update(self.refine(img, out["initial"], gate_scale=gate_scale))
        else:
            out["final"] = out["initial"].clone()
        return out


def result_from_outputs(out: dict, refined: bool, model: TideModel | None = None) -> RestorationResult:
    """Squeeze batch-1 network outputs into a RestorationResult."""
    take = lambda t: t.detach()[0]
    res = RestorationResult(
        initial=take(out["initial"]),
        final=take(out["final"]),
        maps=take(out["maps"]),
        hypotheses=take(out["hypotheses"]),
        fusion_weights=take(out["weights"]),
    )
    if refined:
        res.residual_maps = take(out["residual_maps"])
        res.corrections = take(out["corrections"])
        res.correction = take(out["correction"])
        res.gate = take(out["gate"])
        if model is not None:
            res.expert_scales = model.refine.expert_scales()
            res.global_scale = float(model.refine.gate.scale.detach())
            res.alpha = float(model.refine.estimator.alpha.detach())
    return res
