"""Full-reference quality metrics: PSNR and single-scale SSIM.

PSNR uses MAX = 1 over float images: 10*log10(1/MSE), +inf for identical
inputs. SSIM uses the standard 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
K2 = 0.03, L = 1, computed on the valid region only (no padding), per
channel, averaged over channels. Both metrics accumulate in float64.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, TooSmallError
from .image_io import PlanarImage

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_dims(a: PlanarImage, b: PlanarImage) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionMismatchError(
            f"image shapes differ: {a.data.shape} vs {b.data.shape}"
        )


def psnr(a: PlanarImage, b: PlanarImage) -> float:
    """Peak signal-to-noise ratio in dB; math.inf when the images are identical."""
    _check_dims(a, b)
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    xs = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return g / g.sum()


def _blur_valid(plane: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with the 1-d window g."""
    rows = np.lib.stride_tricks.sliding_window_view(plane, g.size, axis=0) @ g
    return np.lib.stride_tricks.sliding_window_view(rows, g.size, axis=1) @ g


def ssim(a: PlanarImage, b: PlanarImage, mode: str = "rgb_mean") -> float:
    """Mean structural similarity.

    ``mode`` selects the channel treatment: "rgb_mean" scores each channel
    and averages; "luma" scores only the BT.601 luma plane of both images.
    """
    _check_dims(a, b)
    if min(a.height, a.width) < SSIM_WINDOW:
        raise TooSmallError(
            f"image {a.height}x{a.width} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    if mode not in ("rgb_mean", "luma"):
        raise ValueError(f"unknown ssim mode {mode!r}")

    pa = a.data.astype(np.float64)
    pb = b.data.astype(np.float64)
    if mode == "luma" and a.channels == 3:
        coeff = np.array([0.299, 0.587, 0.114])
        pa = np.tensordot(coeff, pa, axes=1)[None]
        pb = np.tensordot(coeff, pb, axes=1)[None]

    g = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    scores = []
    for ch in range(pa.shape[0]):
        x, y = pa[ch], pb[ch]
        mu_x = _blur_valid(x, g)
        mu_y = _blur_valid(y, g)
        xx = _blur_valid(x * x, g) - mu_x * mu_x
        yy = _blur_valid(y * y, g) - mu_y * mu_y
        xy = _blur_valid(x * y, g) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


@dataclass
class MetricsReport:
    """Per-image and aggregate PSNR/SSIM for one evaluation split."""

    rows: list[tuple[str, float, float]] = field(default_factory=list)

    def add(self, name: str, psnr_db: float, ssim_score: float) -> None:
        self.rows.append((name, psnr_db, ssim_score))

    @property
    def count(self) -> int:
        return len(self.rows)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r[1] for r in self.rows])) if self.rows else math.nan

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r[2] for r in self.rows])) if self.rows else math.nan

    def write_tsv(self, path) -> None:
        lines = [f"{name}\t{_fmt(p)}\t{_fmt(s)}" for name, p, s in self.rows]
        lines.append(f"mean\t{_fmt(self.mean_psnr)}\t{_fmt(self.mean_ssim)}")
        Path(path).write_text("\n".join(lines) + "\n")

    def write_json(self, path) -> None:
        payload = {
            "images": [
                {"name": name, "psnr_db": _jsonable(p), "ssim": _jsonable(s)}
                for name, p, s in self.rows
            ],
            "mean_psnr_db": _jsonable(self.mean_psnr),
            "mean_ssim": _jsonable(self.mean_ssim),
            "count": self.count,
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _fmt(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return f"{value:.4f}"


def _jsonable(value: float):
    # JSON has no inf; render it as a string the way the TSV does
    if math.isinf(value) or math.isnan(value):
        return _fmt(value) if math.isinf(value) else "nan"
    return round(value, 6)
