"""Classical single-image enhancement baselines.

All methods take a 3xHxW float array in [0, 1] and return the same shape,
clipped to [0, 1]. The dark-channel family shares one dehazing core and
differs only in which channel transform feeds the dark channel.
"""

from __future__ import annotations

import cv2
import numpy as np
from scipy import ndimage

from .core import Array, BadParamsError, UnknownMethodError, validate_image

DCP_PATCH = 15
DCP_OMEGA = 0.95
DCP_T0 = 0.1
DCP_LIGHT_FRACTION = 0.001  # brightest 0.1% of dark-channel pixels


def _as_f64(img) -> Array:
    validate_image(img)
    return np.asarray(img, dtype=np.float64)


def _finish(img: Array) -> Array:
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def white_balance(img) -> Array:
    """Gray-world: scale each channel so its mean matches the global mean."""
    x = _as_f64(img)
    means = x.mean(axis=(1, 2))
    target = means.mean()
    scale = np.where(means > 1e-8, target / np.maximum(means, 1e-8), 1.0)
    return _finish(x * scale[:, None, None])


def gamma_correction(img, gamma: float = 1.5) -> Array:
    """Brightness lift: out = in ** (1 / gamma)."""
    if gamma <= 0:
        raise BadParamsError("gamma must be positive")
    x = _as_f64(img)
    return _finish(x ** (1.0 / gamma))


def _luma(x: Array) -> Array:
    return 0.299 * x[0] + 0.587 * x[1] + 0.114 * x[2]


def histogram_equalization(img, bins: int = 256) -> Array:
    """Global histogram equalization on luma; chroma ratios preserved."""
    x = _as_f64(img)
    y = _luma(x)
    hist, edges = np.histogram(y, bins=bins, range=(0.0, 1.0))
    cdf = hist.cumsum().astype(np.float64)
    if cdf[-1] == 0:
        return _finish(x)
    cdf /= cdf[-1]
    centers = (edges[:-1] + edges[1:]) / 2.0
    y_eq = np.interp(y, centers, cdf)
    ratio = y_eq / np.maximum(y, 1e-6)
    return _finish(x * ratio[None])


def clahe(img, clip: float = 2.0, tiles: int = 8) -> Array:
    """Contrast-limited adaptive equalization on the LAB lightness channel."""
    if clip <= 0 or tiles < 1:
        raise BadParamsError("need clip > 0 and tiles >= 1")
    x = _as_f64(img)
    rgb8 = np.floor(np.clip(x, 0, 1).transpose(1, 2, 0) * 255.0 + 0.5).astype(np.uint8)
    lab = cv2.cvtColor(rgb8, cv2.COLOR_RGB2LAB)
    op = cv2.createCLAHE(clipLimit=clip, tileGridSize=(tiles, tiles))
    lab[:, :, 0] = op.apply(lab[:, :, 0])
    out = cv2.cvtColor(lab, cv2.COLOR_LAB2RGB).astype(np.float64) / 255.0
    return _finish(out.transpose(2, 0, 1))


def dark_channel(stack: Array, patch: int = DCP_PATCH) -> Array:
    """Min over channels, then a patch x patch spatial minimum.

    The window is clamped at the borders (replicate padding), so each
    output pixel is the minimum over the window's intersection with the
    image.
    """
    if patch < 1 or patch % 2 == 0:
        raise BadParamsError("patch must be an odd positive size")
    per_pixel = np.min(stack, axis=0)
    return ndimage.minimum_filter(per_pixel, size=patch, mode="nearest")


def _dcp_stack(x: Array, mode: str, light: Array | None = None) -> Array:
    """Channel transform feeding the dark channel, optionally normalized
    by the matching ambient-light transform."""
    if mode == "dcp":
        stack, norm = x, light
    elif mode == "udcp":
        stack = x[1:]
        norm = None if light is None else light[1:]
    elif mode == "rcp":
        stack = np.stack([1.0 - x[0], x[1], x[2]])
        norm = None if light is None else np.array([1.0 - light[0], light[1], light[2]])
    else:
        raise UnknownMethodError(f"unknown dark-channel mode {mode!r}")
    if norm is not None:
        stack = stack / np.maximum(norm[:, None, None], 1e-6)
    return stack


def _dehaze(img, mode: str, patch: int, omega: float, t0: float) -> Array:
    if not 0 < omega <= 1 or not 0 < t0 <= 1:
        raise BadParamsError("need 0 < omega <= 1 and 0 < t0 <= 1")
    x = _as_f64(img)
    dark = dark_channel(_dcp_stack(x, mode), patch)
    k = max(1, int(round(DCP_LIGHT_FRACTION * dark.size)))
    top = np.argsort(dark, axis=None)[-k:]
    light = x.reshape(3, -1)[:, top].mean(axis=1)
    dark_norm = dark_channel(_dcp_stack(x, mode, light), patch)
    t = np.clip(1.0 - omega * dark_norm, t0, 1.0)
    restored = (x - light[:, None, None]) / t[None] + light[:, None, None]
    return _finish(restored)


def dcp(img, patch: int = DCP_PATCH, omega: float = DCP_OMEGA, t0: float = DCP_T0) -> Array:
    """Dark channel prior dehazing over all three channels."""
    return _dehaze(img, "dcp", patch, omega, t0)


def udcp(img, patch: int = DCP_PATCH, omega: float = DCP_OMEGA, t0: float = DCP_T0) -> Array:
    """Underwater DCP: red channel excluded from the dark channel."""
    return _dehaze(img, "udcp", patch, omega, t0)


def rcp(img, patch: int = DCP_PATCH, omega: float = DCP_OMEGA, t0: float = DCP_T0) -> Array:
    """Red-channel prior: dark channel over (1 - R, G, B)."""
    return _dehaze(img, "rcp", patch, omega, t0)


BASELINES = {
    "wb": white_balance,
    "gamma": gamma_correction,
    "he": histogram_equalization,
    "clahe": clahe,
    "dcp": dcp,
    "udcp": udcp,
    "rcp": rcp,
}


def apply_baseline(name: str, img, **params) -> Array:
    key = name.strip().lower()
    if key not in BASELINES:
        raise UnknownMethodError(
            f"unknown baseline {name!r}; available: {', '.join(sorted(BASELINES))}"
        )
    return BASELINES[key](img, **params)
