"""Synthetic underwater degradation with paired ground truth.

The forward model attenuates each channel with depth (red fastest),
blends toward an ambient veil with a scattering transmission, applies a
depth-growing blur, and adds sensor noise plus optional marine snow:

    degraded = clamp01( blur_sigma(d)(clean * exp(-beta_c * d)) * t
                        + A * (1 - t) + noise ),    t = exp(-beta_s * d)

Alongside the degraded image it emits four ground-truth severity maps
(color, contrast, detail, noise) on their natural [0, 1] scales, an
8-bit PNG pair per sample, a 16-bit 4-channel PNG for the maps, and a
JSON manifest. Everything is deterministic under the configured seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage

from . import imageio
from .core import Array, BadParamsError, MissingPairError, validate_image

BLUR_LEVELS = 4
NOISE_WINDOW = 5


@dataclass(frozen=True)
class DegradeParams:
    """Physical degradation parameters; red must attenuate fastest."""

    betas: tuple[float, float, float] = (1.0, 0.6, 0.3)
    beta_s: float = 0.6
    ambient: tuple[float, float, float] = (0.22, 0.45, 0.58)
    blur_sigma: tuple[float, float] = (0.0, 1.2)
    noise_std: float = 0.01
    snow_density: float = 0.0005
    seed: int = 0

    @classmethod
    def none(cls, seed: int = 0) -> "DegradeParams":
        """Identity parameters: degrade() returns the clean image bitwise."""
        return cls(
            betas=(0.0, 0.0, 0.0),
            beta_s=0.0,
            blur_sigma=(0.0, 0.0),
            noise_std=0.0,
            snow_density=0.0,
            seed=seed,
        )

    def validate(self) -> "DegradeParams":
        br, bg, bb = self.betas
        zero = br == bg == bb == 0.0
        if not zero and not br > bg > bb > 0.0:
            raise BadParamsError("channel attenuation must satisfy R > G > B > 0")
        if self.beta_s < 0:
            raise BadParamsError("beta_s must be >= 0")
        if not all(0.0 <= a <= 1.0 for a in self.ambient):
            raise BadParamsError("ambient light must be in [0, 1]")
        lo, hi = self.blur_sigma
        if lo < 0 or hi < lo:
            raise BadParamsError("blur_sigma must satisfy 0 <= min <= max")
        if self.noise_std < 0 or self.snow_density < 0:
            raise BadParamsError("noise_std and snow_density must be >= 0")
        return self


def depth_field(h: int, w: int, seed: int) -> Array:
    """Linear top-to-bottom gradient plus low-frequency perturbation, in [0, 1]."""
    if h < 2 or w < 2:
        raise BadParamsError("depth field needs at least 2x2 pixels")
    base = np.linspace(0.0, 1.0, h)[:, None] * np.ones((1, w))
    rng = np.random.default_rng([int(seed), 0x0D])
    coarse = rng.standard_normal((4, 4))
    smooth = cv2.resize(coarse, (w, h), interpolation=cv2.INTER_CUBIC)
    peak = np.abs(smooth).max()
    if peak > 0:
        smooth = smooth / peak
    d = base + 0.25 * smooth
    d -= d.min()
    span = d.max()
    return d / span if span > 0 else d


def _variable_blur(img: Array, sigma: Array, sigma_max: float) -> Array:
    """Per-pixel Gaussian blur by interpolating a small stack of blurs."""
    levels = np.linspace(0.0, sigma_max, BLUR_LEVELS)
    stack = np.stack(
        [
            np.stack([ndimage.gaussian_filter(c, s, mode="nearest") for c in img])
            for s in levels
        ]
    )
    pos = np.clip(sigma / sigma_max, 0.0, 1.0) * (BLUR_LEVELS - 1)
    lo = np.clip(np.floor(pos).astype(int), 0, BLUR_LEVELS - 2)
    frac = pos - lo
    lo_b = np.take_along_axis(stack, lo[None, None], axis=0)[0]
    hi_b = np.take_along_axis(stack, (lo + 1)[None, None], axis=0)[0]
    return lo_b * (1.0 - frac) + hi_b * frac


def degrade(clean, params: DegradeParams, depth: Array | None = None):
    """Apply the forward model; returns (degraded, gt_maps), both float32.

    gt maps, each HxW in [0, 1]: channel attenuation magnitude, 1 - t,
    normalized blur sigma, and normalized local noise magnitude.
    """
    params.validate()
    validate_image(clean, "clean")
    x = np.asarray(clean, dtype=np.float64)
    h, w = x.shape[-2:]
    d = depth_field(h, w, params.seed) if depth is None else np.asarray(depth, dtype=np.float64)
    if d.shape != (h, w):
        raise BadParamsError(f"depth field {d.shape} does not match image {h}x{w}")

    betas = np.asarray(params.betas, dtype=np.float64)
    attenuated = x * np.exp(-betas[:, None, None] * d)

    sig_lo, sig_hi = params.blur_sigma
    if sig_hi > 0:
        sigma = sig_lo + d * (sig_hi - sig_lo)
        blurred = _variable_blur(attenuated, sigma, sig_hi)
        detail_map = sigma / sig_hi
    else:
        blurred = attenuated
        detail_map = np.zeros_like(d)

    t = np.exp(-params.beta_s * d)
    ambient = np.asarray(params.ambient, dtype=np.float64)
    hazed = blurred * t[None] + ambient[:, None, None] * (1.0 - t[None])

    rng = np.random.default_rng([int(params.seed), 0x5EA])
    additive = np.zeros_like(x)
    if params.noise_std > 0:
        field = params.noise_std * (0.5 + 0.5 * d)
        additive = additive + rng.standard_normal(x.shape) * field[None]
    if params.snow_density > 0:
        k = max(1, int(round(params.snow_density * h * w)))
        canvas = np.zeros((h, w))
        rows = rng.integers(0, h, k)
        cols = rng.integers(0, w, k)
        np.add.at(canvas, (rows, cols), rng.uniform(0.4, 0.9, k))
        additive = additive + 4.0 * ndimage.gaussian_filter(canvas, 0.8, mode="constant")[None]

    degraded = np.clip(hazed + additive, 0.0, 1.0)

    if np.any(additive):
        mag = np.abs(additive).mean(axis=0)
        local = ndimage.uniform_filter(mag, size=NOISE_WINDOW, mode="nearest")
        noise_map = local / local.max() if local.max() > 0 else local
    else:
        noise_map = np.zeros_like(d)

    color_map = (1.0 - np.exp(-betas[:, None, None] * d)).mean(axis=0)
    contrast_map = 1.0 - t
    maps = np.stack([color_map, contrast_map, detail_map, noise_map])
    return degraded.astype(np.float32), maps.astype(np.float32)


def make_clean(size: int, rng: np.random.Generator) -> Array:
    """Procedural clean image: smooth gradients, a few shapes, mild texture."""
    coarse = rng.uniform(0.15, 0.85, (4, 4, 3))
    base = cv2.resize(coarse, (size, size), interpolation=cv2.INTER_CUBIC)
    img = np.clip(base.transpose(2, 0, 1), 0.05, 0.95)

    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(int(rng.integers(2, 5))):
        color = rng.uniform(0.1, 0.9, 3)
        if rng.random() < 0.5:
            cy, cx = rng.integers(0, size, 2)
            r = int(rng.integers(max(2, size // 10), max(3, size // 3)))
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        else:
            y0, x0 = rng.integers(0, max(1, size - 4), 2)
            hgt = int(rng.integers(size // 8 + 1, size // 2 + 1))
            wid = int(rng.integers(size // 8 + 1, size // 2 + 1))
            mask = (yy >= y0) & (yy < y0 + hgt) & (xx >= x0) & (xx < x0 + wid)
        img[:, mask] = color[:, None]

    freq = rng.uniform(1.0, 4.0, 2)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    wave = np.sin(2.0 * np.pi * (freq[0] * yy + freq[1] * xx) / size + phase)
    img = img + rng.uniform(0.0, 0.04, 3)[:, None, None] * wave
    return np.clip(img, 0.02, 0.98).astype(np.float32)


def make_pairs(count: int, size: int, params: DegradeParams, seed: int | None = None):
    """In-memory dataset: list of (degraded, clean, gt_maps) float32 triples."""
    if count < 1:
        raise BadParamsError("count must be >= 1")
    base_seed = params.seed if seed is None else int(seed)
    triples = []
    for i in range(count):
        rng = np.random.default_rng([base_seed, i, 0xC1EA])
        clean = make_clean(size, rng)
        pair_params = DegradeParams(**{**asdict(params), "seed": base_seed + i})
        degraded, maps = degrade(clean, pair_params)
        triples.append((degraded, clean, maps))
    return triples


def make_dataset(out_dir, count: int, size: int, params: DegradeParams, seed: int | None = None) -> dict:
    """Write clean/, degraded/, maps/ PNGs plus manifest.json; returns the manifest."""
    out = Path(out_dir)
    for sub in ("clean", "degraded", "maps"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    base_seed = params.seed if seed is None else int(seed)
    entries = []
    for i, (degraded, clean, maps) in enumerate(make_pairs(count, size, params, base_seed)):
        stem = f"{i:04d}.png"
        imageio.save_image(clean, out / "clean" / stem)
        imageio.save_image(degraded, out / "degraded" / stem)
        imageio.save_maps(maps, out / "maps" / stem)
        entries.append(
            {
                "clean": f"clean/{stem}",
                "degraded": f"degraded/{stem}",
                "maps": f"maps/{stem}",
                "seed": base_seed + i,
            }
        )
    manifest = {
        "count": count,
        "images": entries,
        "params": {**asdict(params), "seed": base_seed},
        "size": size,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def load_dataset(root, with_maps: bool = False):
    """Load (degraded, clean[, maps]) pairs written by make_dataset."""
    root = Path(root)
    deg_dir, clean_dir, map_dir = root / "degraded", root / "clean", root / "maps"
    if not deg_dir.is_dir() or not clean_dir.is_dir():
        raise MissingPairError(f"{root} does not contain degraded/ and clean/ folders")
    pairs = []
    for deg_path in sorted(deg_dir.glob("*.png")):
        clean_path = clean_dir / deg_path.name
        if not clean_path.exists():
            raise MissingPairError(f"no clean image for {deg_path.name}")
        item = [imageio.load_image(deg_path), imageio.load_image(clean_path)]
        if with_maps:
            map_path = map_dir / deg_path.name
            if not map_path.exists():
                raise MissingPairError(f"no maps for {deg_path.name}")
            item.append(imageio.load_maps(map_path))
        pairs.append(tuple(item))
    if not pairs:
        raise MissingPairError(f"no samples found under {root}")
    return pairs
