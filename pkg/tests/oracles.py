"""Independent brute-force reference implementations used by the tests.

Everything here is written with explicit loops and plain numpy/math so the
values cannot share code paths (or bugs) with the package under test. These
oracles are intentionally slow; keep inputs small.
"""

from __future__ import annotations

import math

import numpy as np

# Constants are re-declared locally on purpose: the tests compare two
# independent writings of the same documented formulas.
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_LUMA = (0.299, 0.587, 0.114)
_SRGB_TO_XYZ = (
    (0.4124564, 0.3575761, 0.1804375),
    (0.2126729, 0.7151522, 0.0721750),
    (0.0193339, 0.1191920, 0.9503041),
)
_UICM_W_CHROMA = -0.0268
_UICM_W_SPREAD = 0.1586
_UIQM_C = (0.0282, 0.2953, 3.5753)


# ---------------------------------------------------------------------------
# Reference metrics
# ---------------------------------------------------------------------------

def psnr_oracle(pred: np.ndarray, ref: np.ndarray) -> float:
    a = np.asarray(pred, dtype=np.float64)
    b = np.asarray(ref, dtype=np.float64)
    total = 0.0
    count = 0
    for x, y in zip(a.ravel(), b.ravel()):
        total += (float(x) - float(y)) ** 2
        count += 1
    mse = total / count
    if mse == 0.0:
        return float("inf")
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window_oracle() -> np.ndarray:
    half = (_SSIM_WINDOW - 1) / 2.0
    w = np.empty((_SSIM_WINDOW, _SSIM_WINDOW), dtype=np.float64)
    for i in range(_SSIM_WINDOW):
        for j in range(_SSIM_WINDOW):
            di = i - half
            dj = j - half
            w[i, j] = math.exp(-(di * di) / (2.0 * _SSIM_SIGMA ** 2)) * math.exp(
                -(dj * dj) / (2.0 * _SSIM_SIGMA ** 2)
            )
    return w / w.sum()


def ssim_oracle(pred: np.ndarray, ref: np.ndarray) -> float:
    """Mean SSIM over all valid 11x11 windows of every channel."""
    a = np.asarray(pred, dtype=np.float64)
    b = np.asarray(ref, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
        b = b[None]
    window = gaussian_window_oracle()
    c1 = (_SSIM_K1 * 1.0) ** 2
    c2 = (_SSIM_K2 * 1.0) ** 2
    _, h, w = a.shape
    values = []
    for c in range(a.shape[0]):
        for i in range(h - _SSIM_WINDOW + 1):
            for j in range(w - _SSIM_WINDOW + 1):
                px = a[c, i : i + _SSIM_WINDOW, j : j + _SSIM_WINDOW]
                py = b[c, i : i + _SSIM_WINDOW, j : j + _SSIM_WINDOW]
                mu_x = float((window * px).sum())
                mu_y = float((window * py).sum())
                ex2 = float((window * px * px).sum())
                ey2 = float((window * py * py).sum())
                exy = float((window * px * py).sum())
                var_x = ex2 - mu_x * mu_x
                var_y = ey2 - mu_y * mu_y
                cov = exy - mu_x * mu_y
                num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
                den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
                values.append(num / den)
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# No-reference metrics
# ---------------------------------------------------------------------------

def lab_ab_oracle(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel sRGB -> CIELAB a*, b* with scalar arithmetic."""
    x = np.asarray(img, dtype=np.float64)
    _, h, w = x.shape
    a_out = np.empty((h, w), dtype=np.float64)
    b_out = np.empty((h, w), dtype=np.float64)
    delta = 6.0 / 29.0
    white = [sum(row) for row in _SRGB_TO_XYZ]

    def lin(c: float) -> float:
        if c <= 0.04045:
            return c / 12.92
        return ((c + 0.055) / 1.055) ** 2.4

    def f(t: float) -> float:
        if t > delta ** 3:
            return t ** (1.0 / 3.0)
        return t / (3.0 * delta ** 2) + 4.0 / 29.0

    for i in range(h):
        for j in range(w):
            rgb = [lin(float(x[c, i, j])) for c in range(3)]
            xyz = [
                sum(_SRGB_TO_XYZ[r][c] * rgb[c] for c in range(3)) for r in range(3)
            ]
            fx = f(xyz[0] / white[0])
            fy = f(xyz[1] / white[1])
            fz = f(xyz[2] / white[2])
            a_out[i, j] = 500.0 * (fx - fy)
            b_out[i, j] = 200.0 * (fy - fz)
    return a_out, b_out


def uicm_oracle(img: np.ndarray) -> float:
    a, b = lab_ab_oracle(img)
    mu_a = float(a.mean())
    mu_b = float(b.mean())
    sig_a = float(np.sqrt(((a - mu_a) ** 2).mean()))
    sig_b = float(np.sqrt(((b - mu_b) ** 2).mean()))
    return _UICM_W_CHROMA * math.sqrt(mu_a ** 2 + mu_b ** 2) + _UICM_W_SPREAD * (
        sig_a + sig_b
    )


def luma_oracle(img: np.ndarray) -> np.ndarray:
    x = np.asarray(img, dtype=np.float64)
    return _LUMA[0] * x[0] + _LUMA[1] * x[1] + _LUMA[2] * x[2]


def uiconm_oracle(img: np.ndarray, window: int = 5) -> float:
    """Mean local (population) std of luma; replicate-padded windows."""
    y = luma_oracle(img)
    h, w = y.shape
    half = window // 2
    stds = []
    for i in range(h):
        for j in range(w):
            vals = []
            for di in range(-half, half + 1):
                for dj in range(-half, half + 1):
                    ii = min(max(i + di, 0), h - 1)
                    jj = min(max(j + dj, 0), w - 1)
                    vals.append(y[ii, jj])
            vals = np.array(vals, dtype=np.float64)
            m = vals.mean()
            stds.append(math.sqrt(((vals - m) ** 2).mean()))
    return float(np.mean(stds))


def sobel_magnitude_oracle(channel: np.ndarray) -> np.ndarray:
    """|Sobel| with replicated borders, explicit 3x3 correlation."""
    x = np.asarray(channel, dtype=np.float64)
    h, w = x.shape
    # Correlation kernels: derivative [-1, 0, 1] along one axis, smoothing
    # [1, 2, 1] along the other.
    ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]]
    kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]
    out = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            gy = 0.0
            gx = 0.0
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ii = min(max(i + di, 0), h - 1)
                    jj = min(max(j + dj, 0), w - 1)
                    gy += ky[di + 1][dj + 1] * x[ii, jj]
                    gx += kx[di + 1][dj + 1] * x[ii, jj]
            out[i, j] = math.hypot(gx, gy)
    return out


def eme_oracle(channel: np.ndarray, block: int = 8) -> float:
    x = np.asarray(channel, dtype=np.float64)
    h, w = x.shape
    nb_h, nb_w = h // block, w // block
    total = 0.0
    for bi in range(nb_h):
        for bj in range(nb_w):
            patch = x[bi * block : (bi + 1) * block, bj * block : (bj + 1) * block]
            lo = float(patch.min())
            hi = float(patch.max())
            if lo > 1e-12 and hi > 1e-12:
                total += math.log(hi / lo)
    return 2.0 / (nb_h * nb_w) * total


def uism_oracle(img: np.ndarray, block: int = 8) -> float:
    x = np.asarray(img, dtype=np.float64)
    total = 0.0
    for weight, channel in zip(_LUMA, x):
        edge = sobel_magnitude_oracle(channel) * channel
        total += weight * eme_oracle(edge, block)
    return total


def uiqm_oracle(img: np.ndarray) -> float:
    return (
        _UIQM_C[0] * uicm_oracle(img)
        + _UIQM_C[1] * uism_oracle(img)
        + _UIQM_C[2] * uiconm_oracle(img)
    )


# ---------------------------------------------------------------------------
# Loss building blocks
# ---------------------------------------------------------------------------

def diversity_oracle(hypotheses: np.ndarray) -> float:
    """Mean pairwise cosine similarity; zero-norm pairs contribute 0."""
    h = np.asarray(hypotheses, dtype=np.float64)
    if h.ndim == 4:
        h = h[None]
    b, k = h.shape[0], h.shape[1]
    flat = h.reshape(b, k, -1)
    total = 0.0
    pairs = 0
    for i in range(k):
        for j in range(i + 1, k):
            batch_sum = 0.0
            for n in range(b):
                u, v = flat[n, i], flat[n, j]
                nu = math.sqrt(float((u * u).sum()))
                nv = math.sqrt(float((v * v).sum()))
                if nu == 0.0 or nv == 0.0:
                    continue
                batch_sum += float((u * v).sum()) / (nu * nv)
            total += batch_sum / b
            pairs += 1
    return total / pairs


def minmax_oracle(x: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    lo = float(x.min())
    hi = float(x.max())
    return (x - lo) / (hi - lo + eps)


def consistency_oracle(maps: np.ndarray, img: np.ndarray, ref: np.ndarray) -> float:
    """MSE between normalized map-sum and normalized mean |img - ref|."""
    m = np.asarray(maps, dtype=np.float64)
    if m.ndim == 3:
        m = m[None]
    a = np.asarray(img, dtype=np.float64)
    b = np.asarray(ref, dtype=np.float64)
    if a.ndim == 3:
        a = a[None]
        b = b[None]
    errs = []
    for n in range(m.shape[0]):
        severity = minmax_oracle(m[n].sum(axis=0))
        error = minmax_oracle(np.abs(a[n] - b[n]).mean(axis=0))
        errs.append(((severity - error) ** 2).mean())
    return float(np.mean(errs))


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def dark_channel_oracle(stack: np.ndarray, patch: int) -> np.ndarray:
    """Min over channels then over a clamped patch x patch window."""
    x = np.asarray(stack, dtype=np.float64)
    _, h, w = x.shape
    pixel_min = x.min(axis=0)
    half = patch // 2
    out = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            lo = math.inf
            for di in range(-half, half + 1):
                for dj in range(-half, half + 1):
                    ii = min(max(i + di, 0), h - 1)
                    jj = min(max(j + dj, 0), w - 1)
                    if pixel_min[ii, jj] < lo:
                        lo = pixel_min[ii, jj]
            out[i, j] = lo
    return out


def gray_world_oracle(img: np.ndarray) -> np.ndarray:
    x = np.asarray(img, dtype=np.float64)
    target = float(x.mean())
    out = np.empty_like(x)
    for c in range(3):
        mean_c = float(x[c].mean())
        scale = target / mean_c if mean_c > 1e-8 else 1.0
        out[c] = np.clip(x[c] * scale, 0.0, 1.0)
    return out


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def numeric_gradient(fn, x: np.ndarray, eps: float = 1e-5, coords=None) -> dict:
    """Central finite-difference gradient of a scalar function.

    Returns {flat_index: d fn / d x[flat_index]} for the requested flat
    coordinates (all of them when coords is None). fn receives a float64
    array of x.shape.
    """
    base = np.asarray(x, dtype=np.float64).copy()
    flat = base.ravel()
    if coords is None:
        coords = range(flat.size)
    grads = {}
    for idx in coords:
        orig = flat[idx]
        flat[idx] = orig + eps
        hi = float(fn(base))
        flat[idx] = orig - eps
        lo = float(fn(base))
        flat[idx] = orig
        grads[int(idx)] = (hi - lo) / (2.0 * eps)
    return grads


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
