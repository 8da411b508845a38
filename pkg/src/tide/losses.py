"""Differentiable losses for both training stages.

Everything here accepts single images (3xHxW) or batches (Bx3xHxW) and
reduces to a scalar tensor with mean reduction. The SSIM kernel lives
here and is shared with the quality metrics.
"""

from __future__ import annotations

import warnings

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import init_parameters
from .core import BadShapeError, K_MAPS, LossWeights, Tensor, ZeroVectorWarning

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 1.0
IMPROVE_MARGIN = 0.01
_MINMAX_EPS = 1e-8
_PERCEPTUAL_SEED = 709


def _as_batch(x: Tensor, name: str) -> Tensor:
    if x.dim() == 3:
        return x.unsqueeze(0)
    if x.dim() == 4:
        return x
    raise BadShapeError(f"{name}: expected 3 or 4 dims, got {x.dim()}")


def _as_hyp_batch(x: Tensor) -> Tensor:
    if x.dim() == 4:  # Kx3xHxW
        return x.unsqueeze(0)
    if x.dim() == 5:
        return x
    raise BadShapeError(f"hypotheses: expected Kx3xHxW or BxKx3xHxW, got {x.dim()} dims")


def _check_same(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise BadShapeError(f"shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def l1_loss(pred: Tensor, ref: Tensor) -> Tensor:
    """Mean absolute error."""
    _check_same(pred, ref)
    return (pred - ref).abs().mean()


# ---------------------------------------------------------------------------
# SSIM
# ---------------------------------------------------------------------------

def gaussian_window(dtype=torch.float32, device=None) -> Tensor:
    """Normalized 11x11 Gaussian, sigma 1.5."""
    half = (SSIM_WINDOW - 1) / 2.0
    coords = torch.arange(SSIM_WINDOW, dtype=dtype, device=device) - half
    g = torch.exp(-(coords ** 2) / (2.0 * SSIM_SIGMA ** 2))
    kernel = torch.outer(g, g)
    return kernel / kernel.sum()


def ssim_index(a: Tensor, b: Tensor) -> Tensor:
    """Mean SSIM over valid 11x11 windows, channels treated independently."""
    a, b = _as_batch(a, "a"), _as_batch(b, "b")
    _check_same(a, b)
    h, w = a.shape[-2], a.shape[-1]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise BadShapeError(f"ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")
    kernel = gaussian_window(dtype=a.dtype, device=a.device).view(1, 1, SSIM_WINDOW, SSIM_WINDOW)
    x = a.reshape(-1, 1, h, w)
    y = b.reshape(-1, 1, h, w)
    mu_x = F.conv2d(x, kernel)
    mu_y = F.conv2d(y, kernel)
    xx = F.conv2d(x * x, kernel) - mu_x * mu_x
    yy = F.conv2d(y * y, kernel) - mu_y * mu_y
    xy = F.conv2d(x * y, kernel) - mu_x * mu_y
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return (num / den).mean()


def ssim_loss(pred: Tensor, ref: Tensor) -> Tensor:
    """1 - mean SSIM."""
    return 1.0 - ssim_index(pred, ref)


# ---------------------------------------------------------------------------
# Perceptual
# ---------------------------------------------------------------------------

class PerceptualFeatures(nn.Module):
    """Fixed conv pyramid used as a feature extractor.

    Three strided stages with deterministic random weights; parameters are
    frozen. Any pretrained extractor with the same interface (a callable
    returning a list of feature tensors) can be passed to perceptual_loss
    instead.
    """

    def __init__(self, seed: int = _PERCEPTUAL_SEED):
        super().__init__()
        widths = (8, 16, 32)
        stages = []
        cin = 3
        for cout in widths:
            stages.append(
                nn.Sequential(nn.Conv2d(cin, cout, 3, stride=2, padding=1), nn.LeakyReLU(0.2))
            )
            cin = cout
        self.stages = nn.ModuleList(stages)
        init_parameters(self, seed)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x: Tensor) -> list[Tensor]:
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


def perceptual_loss(pred: Tensor, ref: Tensor, features: PerceptualFeatures | None = None) -> Tensor:
    """Mean L1 distance between feature pyramids, all stages weighted 1.0."""
    pred, ref = _as_batch(pred, "pred"), _as_batch(ref, "ref")
    _check_same(pred, ref)
    if features is None:
        features = PerceptualFeatures()
    features = features.to(dtype=pred.dtype, device=pred.device)
    fp = features(pred)
    fr = features(ref)
    total = pred.new_zeros(())
    for a, b in zip(fp, fr):
        total = total + (a - b).abs().mean()
    return total


# ---------------------------------------------------------------------------
# Hypothesis-level losses
# ---------------------------------------------------------------------------

def diversity_loss(hypotheses: Tensor) -> Tensor:
    """Mean pairwise cosine similarity of the flattened hypotheses.

    Identical hypotheses score 1; orthogonal ones 0. A zero-vector
    hypothesis contributes 0 to its pairs and raises a warning.
    """
    h = _as_hyp_batch(hypotheses)
    b, k = h.shape[0], h.shape[1]
    flat = h.reshape(b, k, -1)
    norms = flat.norm(dim=2)
    if bool((norms.detach() == 0).any()):
        warnings.warn(
            "zero-vector hypothesis in diversity loss; its pairs contribute 0",
            ZeroVectorWarning,
        )
    total = flat.new_zeros(())
    pairs = 0
    for i in range(k):
        for j in range(i + 1, k):
            dot = (flat[:, i] * flat[:, j]).sum(dim=1)
            denom = norms[:, i] * norms[:, j]
            valid = denom.detach() > 0
            cos = torch.where(valid, dot / denom.clamp_min(1e-30), torch.zeros_like(dot))
            total = total + cos.mean()
            pairs += 1
    return total / pairs


def _minmax(x: Tensor) -> Tensor:
    """Per-item min-max normalization; constant maps normalize to zeros."""
    flat = x.reshape(x.shape[0], -1)
    lo = flat.min(dim=1).values.view(-1, *([1] * (x.dim() - 1)))
    hi = flat.max(dim=1).values.view(-1, *([1] * (x.dim() - 1)))
    return (x - lo) / (hi - lo + _MINMAX_EPS)


def consistency_loss(maps: Tensor, img: Tensor, ref: Tensor) -> Tensor:
    """MSE between the normalized map sum and the normalized error magnitude."""
    img, ref = _as_batch(img, "img"), _as_batch(ref, "ref")
    _check_same(img, ref)
    if maps.dim() == 3:
        maps = maps.unsqueeze(0)
    if maps.dim() != 4 or maps.shape[1] != K_MAPS:
        raise BadShapeError(f"maps must be (B,{K_MAPS},H,W), got {tuple(maps.shape)}")
    severity = _minmax(maps.sum(dim=1))
    error = _minmax((img - ref).abs().mean(dim=1))
    return ((severity - error) ** 2).mean()


def aux_hypothesis_loss(hypotheses: Tensor, ref: Tensor) -> Tensor:
    """Mean L1 of every hypothesis against the reference."""
    h = _as_hyp_batch(hypotheses)
    ref = _as_batch(ref, "ref")
    if h.shape[0] != ref.shape[0] or h.shape[2:] != ref.shape[1:]:
        raise BadShapeError("hypotheses and reference disagree on shape")
    return (h - ref.unsqueeze(1)).abs().mean()


# ---------------------------------------------------------------------------
# Stage-2 losses
# ---------------------------------------------------------------------------

def magnitude_loss(correction: Tensor) -> Tensor:
    """Mean absolute correction; keeps stage 2 conservative."""
    return correction.abs().mean()


def improvement_loss(final: Tensor, initial: Tensor, ref: Tensor, margin: float = IMPROVE_MARGIN) -> Tensor:
    """Hinge on the MAE gap: positive when stage 2 fails to beat stage 1
    by at least `margin`, zero once it does."""
    _check_same(final, ref)
    _check_same(initial, ref)
    gap = (final - ref).abs().mean() - (initial - ref).abs().mean() + margin
    return gap.clamp_min(0.0)


# ---------------------------------------------------------------------------
# Stage totals
# ---------------------------------------------------------------------------

def stage1_terms(
    initial: Tensor,
    ref: Tensor,
    hypotheses: Tensor,
    maps: Tensor,
    img: Tensor,
    weights: LossWeights | None = None,
    features: PerceptualFeatures | None = None,
) -> tuple[Tensor, dict]:
    """Weighted stage-1 total plus the unweighted term values."""
    w = weights or LossWeights()
    terms = {
        "l1": l1_loss(initial, ref),
        "ssim": ssim_loss(initial, ref),
        "perceptual": perceptual_loss(initial, ref, features),
        "diversity": diversity_loss(hypotheses),
        "consistency": consistency_loss(maps, img, ref),
        "aux": aux_hypothesis_loss(hypotheses, ref),
    }
    total = (
        w.l1 * terms["l1"]
        + w.ssim * terms["ssim"]
        + w.perceptual * terms["perceptual"]
        + w.diversity * terms["diversity"]
        + w.consistency * terms["consistency"]
        + w.aux * terms["aux"]
    )
    return total, terms


def stage2_terms(
    final: Tensor,
    initial: Tensor,
    ref: Tensor,
    correction: Tensor,
    weights: LossWeights | None = None,
    features: PerceptualFeatures | None = None,
) -> tuple[Tensor, dict]:
    """Weighted stage-2 total plus the unweighted term values.

    Reconstruction terms reuse the stage-1 weights, applied to the final
    output; magnitude and improvement regularize the correction itself.
    """
    w = weights or LossWeights()
    terms = {
        "l1": l1_loss(final, ref),
        "ssim": ssim_loss(final, ref),
        "perceptual": perceptual_loss(final, ref, features),
        "magnitude": magnitude_loss(correction),
        "improvement": improvement_loss(final, initial, ref),
    }
    total = (
        w.l1 * terms["l1"]
        + w.ssim * terms["ssim"]
        + w.perceptual * terms["perceptual"]
        + w.magnitude * terms["magnitude"]
        + w.improve * terms["improvement"]
    )
    return total, terms
