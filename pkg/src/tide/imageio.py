"""PNG I/O and geometry helpers.

8-bit RGB PNGs carry images (decode divides by 255, encode rounds half
up); 16-bit 4-channel PNGs carry ground-truth degradation maps.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import cv2
import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import Array, BadShapeError, CropWarning, UnreadableImageError, clamp01


def load_image(path) -> Array:
    """PNG -> float32 3xHxW in [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            rgb = np.asarray(im.convert("RGB"), dtype=np.float32)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise UnreadableImageError(f"cannot read image {path}: {exc}") from exc
    return np.ascontiguousarray(rgb.transpose(2, 0, 1)) / 255.0


def save_image(img, path) -> None:
    """Float 3xHxW in [0, 1] -> 8-bit RGB PNG, rounding half up."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise BadShapeError(f"expected 3xHxW, got {arr.shape}")
    arr = np.clip(arr, 0.0, 1.0)
    quant = np.floor(arr * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(quant.transpose(1, 2, 0), mode="RGB").save(Path(path))


def save_gray(img, path) -> None:
    """Float HxW in [0, 1] -> 8-bit grayscale PNG, rounding half up."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise BadShapeError(f"expected HxW, got {arr.shape}")
    quant = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(quant, mode="L").save(Path(path))


def save_maps(maps, path) -> None:
    """Float Kx H x W maps in [0, 1] -> 16-bit 4-channel PNG."""
    arr = np.asarray(maps, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 4:
        raise BadShapeError(f"expected 4xHxW maps, got {arr.shape}")
    arr = np.clip(arr, 0.0, 1.0)
    quant = np.floor(arr * 65535.0 + 0.5).astype(np.uint16)
    ok = cv2.imwrite(str(path), quant.transpose(1, 2, 0))
    if not ok:
        raise OSError(f"could not write {path}")


def load_maps(path) -> Array:
    """16-bit 4-channel PNG -> float32 4xHxW in [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise UnreadableImageError(f"cannot read maps {path}")
    if raw.ndim != 3 or raw.shape[2] != 4 or raw.dtype != np.uint16:
        raise UnreadableImageError(f"{path}: expected 16-bit 4-channel PNG")
    return np.ascontiguousarray(raw.transpose(2, 0, 1)).astype(np.float32) / 65535.0


def center_crop_to_multiple(img, divisor: int):
    """Crop a 3xHxW image so H and W are multiples of `divisor`.

    Returns the (possibly) cropped array; warns when pixels are dropped.
    """
    h, w = img.shape[-2], img.shape[-1]
    new_h, new_w = (h // divisor) * divisor, (w // divisor) * divisor
    if new_h == 0 or new_w == 0:
        raise BadShapeError(
            f"image {h}x{w} smaller than the required multiple of {divisor}"
        )
    if new_h == h and new_w == w:
        return img
    top = (h - new_h) // 2
    left = (w - new_w) // 2
    warnings.warn(
        f"center-cropping {h}x{w} to {new_h}x{new_w} (divisible by {divisor}); "
        "pass a resize option to rescale instead",
        CropWarning,
    )
    return img[..., top : top + new_h, left : left + new_w]


def resize_to_multiple(img, divisor: int) -> Array:
    """Bilinearly resize a 3xHxW image to the nearest multiples of `divisor`."""
    h, w = img.shape[-2], img.shape[-1]
    new_h = max(divisor, int(round(h / divisor)) * divisor)
    new_w = max(divisor, int(round(w / divisor)) * divisor)
    if (new_h, new_w) == (h, w):
        return np.asarray(img, dtype=np.float32)
    hwc = np.asarray(img, dtype=np.float32).transpose(1, 2, 0)
    out = cv2.resize(hwc, (new_w, new_h), interpolation=cv2.INTER_LINEAR)
    return clamp01(np.ascontiguousarray(out.transpose(2, 0, 1)))
