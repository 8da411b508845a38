"""Image quality metrics for underwater restoration.

Reference metrics: PSNR and SSIM. No-reference metrics: UICM (colorfulness
in LAB), UIConM (local contrast), UISM (sharpness), and their UIQM
combination. All computations run in double precision on channels-first
arrays in [0, 1].

UISM has no single canonical formula in the underwater literature; this
module uses the standard UIQM-family definition: per channel, the Sobel
edge magnitude map is multiplied with the channel, an EME log-contrast
measure is computed over non-overlapping 8x8 blocks,

    EME = (2 / n_blocks) * sum_blocks ln(block_max / block_min),

blocks with a zero extreme contribute 0, and the per-channel EMEs are
combined with luma weights 0.299 / 0.587 / 0.114.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from scipy import ndimage

from . import imageio
from .core import (
    Array,
    BadShapeError,
    MissingPairError,
    UnsupportedMetricError,
    validate_image,
)
from .losses import ssim_index

UIQM_C1 = 0.0282
UIQM_C2 = 0.2953
UIQM_C3 = 3.5753
UICM_W_CHROMA = -0.0268
UICM_W_SPREAD = 0.1586
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# sRGB -> XYZ (D65). Rows sum to the white point, so neutral grays map to
# a* = b* = 0 up to rounding.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = _SRGB_TO_XYZ.sum(axis=1)

NO_REFERENCE_METRICS = ("uicm", "uiconm", "uism", "uiqm")
REFERENCE_METRICS = ("psnr", "ssim")
_EXTERNAL_METRICS = {
    "lpips": "LPIPS needs a pretrained network; plug one in via "
    "tide.losses.perceptual_loss with your own feature extractor",
    "brisque": "BRISQUE needs a fitted natural-scene model and is not bundled",
}


def _as_f64(img, name: str = "image") -> Array:
    validate_image(img, name)
    if isinstance(img, torch.Tensor):
        img = img.detach().cpu().numpy()
    return np.asarray(img, dtype=np.float64)


def psnr(pred, ref) -> float:
    """10 * log10(1 / MSE); identical images give inf."""
    a, b = _as_f64(pred, "pred"), _as_f64(ref, "ref")
    if a.shape != b.shape:
        raise BadShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def ssim(pred, ref) -> float:
    """Mean SSIM, same Gaussian-window kernel as the training loss."""
    a, b = _as_f64(pred, "pred"), _as_f64(ref, "ref")
    if a.shape != b.shape:
        raise BadShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    return float(ssim_index(torch.from_numpy(a), torch.from_numpy(b)))


def _srgb_to_lab(img: Array) -> tuple[Array, Array, Array]:
    """Standard sRGB -> CIELAB (D65): gamma expansion, matrix, cube-root."""
    flat = img.reshape(3, -1)
    linear = np.where(
        flat <= 0.04045, flat / 12.92, ((flat + 0.055) / 1.055) ** 2.4
    )
    xyz = _SRGB_TO_XYZ @ linear
    t = xyz / _WHITE[:, None]
    delta = 6.0 / 29.0
    f = np.where(t > delta ** 3, np.cbrt(t), t / (3.0 * delta ** 2) + 4.0 / 29.0)
    lum = 116.0 * f[1] - 16.0
    a = 500.0 * (f[0] - f[1])
    b = 200.0 * (f[1] - f[2])
    return lum, a, b


def uicm(img) -> float:
    """Colorfulness: chroma-mean penalty plus chroma-spread reward on LAB a,b."""
    x = _as_f64(img)
    _, a, b = _srgb_to_lab(x)
    mu_a, mu_b = float(a.mean()), float(b.mean())
    sigma_a, sigma_b = float(a.std()), float(b.std())
    return UICM_W_CHROMA * np.sqrt(mu_a ** 2 + mu_b ** 2) + UICM_W_SPREAD * (
        sigma_a + sigma_b
    )


def _luma(x: Array) -> Array:
    r, g, b = LUMA_WEIGHTS
    return r * x[0] + g * x[1] + b * x[2]


def uiconm(img, window: int = 5) -> float:
    """Mean local standard deviation of luma over window x window patches.

    Borders are replicate-padded so every pixel owns a full window. The
    luma is shifted by its first pixel before filtering, which keeps
    constant images at exactly zero without changing the result.
    """
    x = _as_f64(img)
    y = _luma(x)
    z = y - y.flat[0]
    mean = ndimage.uniform_filter(z, size=window, mode="nearest")
    mean_sq = ndimage.uniform_filter(z * z, size=window, mode="nearest")
    var = np.maximum(mean_sq - mean * mean, 0.0)
    return float(np.sqrt(var).mean())


def _eme(channel: Array, block: int) -> float:
    h, w = channel.shape
    nb_h, nb_w = h // block, w // block
    if nb_h == 0 or nb_w == 0:
        raise BadShapeError(f"image too small for {block}x{block} EME blocks")
    blocks = channel[: nb_h * block, : nb_w * block].reshape(
        nb_h, block, nb_w, block
    )
    bmax = blocks.max(axis=(1, 3))
    bmin = blocks.min(axis=(1, 3))
    safe = (bmin > 1e-12) & (bmax > 1e-12)
    ratio = np.where(safe, bmax / np.where(safe, bmin, 1.0), 1.0)
    return float(2.0 / (nb_h * nb_w) * np.log(ratio).sum())


def uism(img, block: int = 8) -> float:
    """Sharpness via Sobel-edge-weighted EME; see the module docstring."""
    x = _as_f64(img)
    total = 0.0
    for weight, channel in zip(LUMA_WEIGHTS, x):
        gy = ndimage.sobel(channel, axis=0, mode="nearest")
        gx = ndimage.sobel(channel, axis=1, mode="nearest")
        edge = np.hypot(gx, gy) * channel
        total += weight * _eme(edge, block)
    return float(total)


def uiqm(img) -> float:
    """Linear combination of UICM, UISM, and UIConM."""
    return UIQM_C1 * uicm(img) + UIQM_C2 * uism(img) + UIQM_C3 * uiconm(img)


# ---------------------------------------------------------------------------
# Batch evaluation
# ---------------------------------------------------------------------------

_METRIC_FNS = {
    "psnr": psnr,
    "ssim": ssim,
    "uicm": lambda pred, ref=None: uicm(pred),
    "uiconm": lambda pred, ref=None: uiconm(pred),
    "uism": lambda pred, ref=None: uism(pred),
    "uiqm": lambda pred, ref=None: uiqm(pred),
}


def resolve_metric(name: str):
    key = name.strip().lower()
    if key in _EXTERNAL_METRICS:
        raise UnsupportedMetricError(f"{name}: {_EXTERNAL_METRICS[key]}")
    if key not in _METRIC_FNS:
        raise UnsupportedMetricError(
            f"unknown metric {name!r}; supported: {', '.join(sorted(_METRIC_FNS))}"
        )
    return key


@dataclass
class MetricReport:
    """Per-image metric values plus column means."""

    metrics: tuple[str, ...]
    rows: list[tuple[str, list[float]]]

    def means(self) -> list[float]:
        table = np.array([vals for _, vals in self.rows], dtype=np.float64)
        return [float(v) for v in table.mean(axis=0)]

    def to_csv(self) -> str:
        def cell(v: float) -> str:
            if np.isinf(v):
                return "inf" if v > 0 else "-inf"
            return format(v, ".6f")

        lines = ["image," + ",".join(self.metrics)]
        for name, vals in self.rows:
            lines.append(name + "," + ",".join(cell(v) for v in vals))
        lines.append("MEAN," + ",".join(cell(v) for v in self.means()))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())


def evaluate_pairs(pred_dir, ref_dir, metrics) -> MetricReport:
    """Score every image in pred_dir; reference metrics pair by filename.

    ref_dir may be None when only no-reference metrics are requested.
    """
    names = tuple(resolve_metric(m) for m in metrics)
    if not names:
        raise UnsupportedMetricError("no metrics requested")
    needs_ref = any(n in REFERENCE_METRICS for n in names)
    if needs_ref and ref_dir is None:
        raise MissingPairError("reference metrics requested without a reference dir")
    pred_dir = Path(pred_dir)
    files = sorted(p for p in pred_dir.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise MissingPairError(f"no PNG images found in {pred_dir}")
    rows = []
    for path in files:
        pred = imageio.load_image(path)
        ref = None
        if needs_ref:
            ref_path = Path(ref_dir) / path.name
            if not ref_path.exists():
                raise MissingPairError(f"no reference image for {path.name}")
            ref = imageio.load_image(ref_path)
        values = []
        for n in names:
            values.append(
                float(_METRIC_FNS[n](pred, ref)) if n in REFERENCE_METRICS
                else float(_METRIC_FNS[n](pred))
            )
        rows.append((path.name, values))
    return MetricReport(metrics=names, rows=rows)
