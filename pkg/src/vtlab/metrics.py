"""Full-reference image quality metrics: MSE/RMSE, SSIM, and weighted SSIM.

All metrics compare Rec. 601 luminance. SSIM uses a plain sliding window
with uniform (population) statistics per window and averages the per-window
quality values; the weighted variant replaces the plain average with
center-distance weights so distortion near the screen center counts more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .image import luminance


@dataclass(frozen=True)
class SsimParams:
    window: int = 8
    stride: int = 1
    k1: float = 0.01
    k2: float = 0.03
    value_range: float = 255.0
    center_floor: float = 0.05  # weight floor for the weighted variant

    @property
    def c1(self) -> float:
        return (self.k1 * self.value_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.value_range) ** 2


def mse(x: np.ndarray, y: np.ndarray) -> float:
    """Mean squared luminance difference."""
    lx, ly = luminance(x), luminance(y)
    if lx.shape != ly.shape:
        raise ValueError(f"image dimensions differ: {lx.shape} vs {ly.shape}")
    d = lx - ly
    return float(np.mean(d * d))


def rmse(x: np.ndarray, y: np.ndarray) -> float:
    return math.sqrt(mse(x, y))


def _box_sums(img: np.ndarray, window: int, stride: int) -> np.ndarray:
    integral = np.zeros((img.shape[0] + 1, img.shape[1] + 1))
    integral[1:, 1:] = np.cumsum(np.cumsum(img, axis=0), axis=1)
    h = img.shape[0] - window + 1
    w = img.shape[1] - window + 1
    a = integral[window:window + h:stride, window:window + w:stride]
    b = integral[0:h:stride, window:window + w:stride]
    c = integral[window:window + h:stride, 0:w:stride]
    d = integral[0:h:stride, 0:w:stride]
    return a - b - c + d


def ssim_map(x: np.ndarray, y: np.ndarray, params: SsimParams = SsimParams()) -> np.ndarray:
    """Per-window structural similarity over every window position."""
    lx, ly = luminance(x), luminance(y)
    if lx.shape != ly.shape:
        raise ValueError(f"image dimensions differ: {lx.shape} vs {ly.shape}")
    w = params.window
    if w > min(lx.shape):
        raise ValueError(f"window {w} exceeds image dimensions {lx.shape}")
    n = w * w
    mu_x = _box_sums(lx, w, params.stride) / n
    mu_y = _box_sums(ly, w, params.stride) / n
    var_x = _box_sums(lx * lx, w, params.stride) / n - mu_x * mu_x
    var_y = _box_sums(ly * ly, w, params.stride) / n - mu_y * mu_y
    cov = _box_sums(lx * ly, w, params.stride) / n - mu_x * mu_y
    c1, c2 = params.c1, params.c2
    return ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )


def ssim(x: np.ndarray, y: np.ndarray, params: SsimParams = SsimParams()) -> float:
    """Mean structural similarity: 1.0 for identical images."""
    return float(np.mean(ssim_map(x, y, params)))


def _window_weights(shape: tuple[int, int], window: int, stride: int,
                    map_shape: tuple[int, int], floor: float) -> np.ndarray:
    height, width = shape
    ys = (np.arange(map_shape[0]) * stride + window / 2.0)[:, None]
    xs = np.arange(map_shape[1]) * stride + window / 2.0
    r = np.hypot(xs - width / 2.0, ys - height / 2.0)
    r_max = math.hypot(width / 2.0, height / 2.0)
    return np.maximum(floor, 1.0 - r / r_max)


def wssim(x: np.ndarray, y: np.ndarray, params: SsimParams = SsimParams()) -> float:
    """SSIM with window weights decreasing toward the screen border."""
    q = ssim_map(x, y, params)
    lx = luminance(x)
    weights = _window_weights(lx.shape, params.window, params.stride, q.shape,
                              params.center_floor)
    return float(np.sum(weights * q) / np.sum(weights))


@dataclass
class QualityRecord:
    frame: int
    rmse: float
    ssim: float
    wssim: float


def report(
    reference: Sequence[np.ndarray],
    test: Sequence[np.ndarray],
    params: SsimParams = SsimParams(),
    csv_path: Optional[str] = None,
) -> list[QualityRecord]:
    """Per-frame quality records for a pair of frame sequences.

    The optional CSV gets one row per frame plus a trailing mean row.
    """
    if len(reference) != len(test):
        raise ValueError(f"frame counts differ: {len(reference)} vs {len(test)}")
    records = [
        QualityRecord(i, rmse(r, t), ssim(r, t, params), wssim(r, t, params))
        for i, (r, t) in enumerate(zip(reference, test))
    ]
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("frame,rmse,ssim,wssim\n")
            for rec in records:
                fh.write(f"{rec.frame},{rec.rmse:.9g},{rec.ssim:.9g},{rec.wssim:.9g}\n")
            if records:
                fh.write(
                    "mean,{:.9g},{:.9g},{:.9g}\n".format(
                        sum(r.rmse for r in records) / len(records),
                        sum(r.ssim for r in records) / len(records),
                        sum(r.wssim for r in records) / len(records),
                    )
                )
    return records
