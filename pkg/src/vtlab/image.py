"""Raster helpers shared by the build pipeline, the sampler, and the metrics."""

from __future__ import annotations

import numpy as np
from PIL import Image

# Rec. 601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


def load_png(path: str) -> np.ndarray:
    """Load an image as (H, W, 3) uint8."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_png(img: np.ndarray, path: str) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError("save_png expects uint8 data")
    Image.fromarray(img).save(path, format="PNG")


def luminance(img: np.ndarray) -> np.ndarray:
    """Luminance of an RGB image as float64; 2-D inputs pass through unchanged."""
    img = np.asarray(img)
    if img.ndim == 2:
        return img.astype(np.float64)
    return img.astype(np.float64) @ _LUMA


def round_half_up_u8(x: np.ndarray) -> np.ndarray:
    """Round to nearest with halves up, clipped to the 8-bit range."""
    return np.clip(np.floor(np.asarray(x, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def box_downsample(img: np.ndarray) -> np.ndarray:
    """Halve a square RGB8 image: each output texel is the 2x2 mean, halves rounded up.

    Integer arithmetic keeps the result exact: floor((a+b+c+d+2) / 4).
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    if h % 2 or w % 2:
        raise ValueError(f"image edge must be even, got {w}x{h}")
    s = img.astype(np.uint32)
    total = s[0::2, 0::2] + s[0::2, 1::2] + s[1::2, 0::2] + s[1::2, 1::2]
    return ((total + 2) // 4).astype(np.uint8)


def upsample_bilinear_2x(img: np.ndarray) -> np.ndarray:
    """Double an image bilinearly with half-texel centers and edge clamp.

    Output texel i samples the input at i/2 - 0.25, so the interpolation
    weights are always 0.25/0.75 and the result is exact in float64.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]

    def axis_coords(n):
        pos = (np.arange(2 * n) + 0.5) / 2.0 - 0.5
        lo = np.floor(pos).astype(np.int64)
        frac = pos - lo
        lo0 = np.clip(lo, 0, n - 1)
        lo1 = np.clip(lo + 1, 0, n - 1)
        return lo0, lo1, frac

    y0, y1, fy = axis_coords(h)
    x0, x1, fx = axis_coords(w)
    fy = fy.reshape(-1, 1) if img.ndim == 2 else fy.reshape(-1, 1, 1)
    fx = fx.reshape(1, -1) if img.ndim == 2 else fx.reshape(1, -1, 1)
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy
