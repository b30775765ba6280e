"""RGB<->HSV and RGB<->YCbCr conversions plus luminance split/merge.

Two luminance definitions are supported:

  V = max(R, G, B)                 (hexcone HSV value channel)
  Y = 0.299 R + 0.587 G + 0.114 B  (BT.601 luma row)

YCbCr here is full-range float BT.601 with zero-centered chroma:
Cb = (B - Y) / 1.772 and Cr = (R - Y) / 1.402, no studio swing and no +0.5
offset, which makes the transform exactly affine-invertible. Conversions
compute in float64 and store float32; both round trips land well inside
1e-5 absolute error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, WrongSpaceError
from .image_io import ColorSpace, PlanarImage

# Tolerance past which clamping an out-of-gamut YCbCr inverse is reported.
GAMUT_EPS = 1e-6


@dataclass
class LumaChromaPair:
    """A luminance plane plus the two untouched chroma planes.

    ``chroma`` holds (H, S) for HSV or (Cb, Cr) for YCbCr as a bare
    (2, H, W) float32 array; ``space`` records which transform produced it.
    """

    luma: PlanarImage          # GRAY, 1 plane
    chroma: np.ndarray         # (2, H, W) float32
    space: ColorSpace          # HSV or YCBCR

    def __post_init__(self):
        self.chroma = np.ascontiguousarray(self.chroma, dtype=np.float32)
        if self.chroma.shape != (2, self.luma.height, self.luma.width):
            raise DimensionMismatchError(
                f"chroma shape {self.chroma.shape} does not match luma "
                f"{self.luma.height}x{self.luma.width}"
            )


def rgb_to_hsv(img: PlanarImage) -> PlanarImage:
    """Hexcone HSV. H is stored scaled to [0, 1); H = 0 on achromatic pixels."""
    img.require_space(ColorSpace.RGB)
    r, g, b = img.data.astype(np.float64)
    v = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    c = v - mn

    s = np.where(v > 0.0, c / np.where(v > 0.0, v, 1.0), 0.0)

    safe_c = np.where(c > 0.0, c, 1.0)
    h_sector = np.select(
        [c == 0.0, v == r, v == g],
        [0.0,
         np.mod((g - b) / safe_c, 6.0),
         (b - r) / safe_c + 2.0],
        default=(r - g) / safe_c + 4.0,
    )
    h = h_sector / 6.0
    h = np.where(h >= 1.0, 0.0, h)  # guard the H=1.0 wrap onto [0, 1)
    return PlanarImage(ColorSpace.HSV, np.stack([h, s, v]))


def hsv_to_rgb(img: PlanarImage) -> PlanarImage:
    """Inverse hexcone transform; output in [0, 1]."""
    img.require_space(ColorSpace.HSV)
    h, s, v = img.data.astype(np.float64)
    h6 = h * 6.0

    def channel(n):
        k = np.mod(n + h6, 6.0)
        return v - v * s * np.clip(np.minimum(k, 4.0 - k), 0.0, 1.0)

    return PlanarImage(ColorSpace.RGB, np.stack([channel(5.0), channel(3.0), channel(1.0)]))


def rgb_to_ycbcr(img: PlanarImage) -> PlanarImage:
    """Full-range BT.601: Y = 0.299R + 0.587G + 0.114B, zero-centered chroma."""
    img.require_space(ColorSpace.RGB)
    r, g, b = img.data.astype(np.float64)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = (b - y) / 1.772
    cr = (r - y) / 1.402
    return PlanarImage(ColorSpace.YCBCR, np.stack([y, cb, cr]))


def ycbcr_to_rgb(img: PlanarImage) -> tuple[PlanarImage, np.ndarray]:
    """Exact affine inverse of :func:`rgb_to_ycbcr`, clamped to [0, 1].

    Returns ``(rgb, clipped)`` where ``clipped`` is an (H, W) bool mask of
    pixels whose value was changed by more than 1e-6 when clamping; the
    image-level out-of-gamut flag is ``clipped.any()``.
    """
    img.require_space(ColorSpace.YCBCR)
    y, cb, cr = img.data.astype(np.float64)
    r = y + 1.402 * cr
    b = y + 1.772 * cb
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    raw = np.stack([r, g, b])
    clamped = np.clip(raw, 0.0, 1.0)
    clipped = (np.abs(raw - clamped) > GAMUT_EPS).any(axis=0)
    return PlanarImage(ColorSpace.RGB, clamped), clipped


def split_luma(img: PlanarImage, space: ColorSpace) -> LumaChromaPair:
    """Convert to HSV or YCbCr and separate the luminance plane.

    luma is the V plane (HSV) or Y plane (YCbCr); chroma carries the other
    two planes untouched.
    """
    img.require_space(ColorSpace.RGB)
    if space is ColorSpace.HSV:
        hsv = rgb_to_hsv(img)
        luma = PlanarImage(ColorSpace.GRAY, hsv.data[2:3])
        chroma = hsv.data[0:2]
    elif space is ColorSpace.YCBCR:
        ycc = rgb_to_ycbcr(img)
        luma = PlanarImage(ColorSpace.GRAY, ycc.data[0:1])
        chroma = ycc.data[1:3]
    else:
        raise WrongSpaceError(f"cannot split luminance in {space.name}")
    return LumaChromaPair(luma=luma, chroma=chroma, space=space)


def merge_luma(pair: LumaChromaPair) -> tuple[PlanarImage, np.ndarray]:
    """Reassemble (luma, chroma) in the tagged space and convert back to RGB.

    Returns ``(rgb, clipped)``; the mask is all-False for HSV (the inverse
    hexcone cannot leave gamut) and marks clamped pixels for YCbCr.
    """
    luma_plane = pair.luma.data[0]
    if pair.chroma.shape[1:] != luma_plane.shape:
        raise DimensionMismatchError(
            f"chroma {pair.chroma.shape[1:]} vs luma {luma_plane.shape}"
        )
    if pair.space is ColorSpace.HSV:
        hsv = PlanarImage(ColorSpace.HSV, np.stack([pair.chroma[0], pair.chroma[1], luma_plane]))
        rgb = hsv_to_rgb(hsv)
        clipped = np.zeros(luma_plane.shape, dtype=bool)
        return rgb, clipped
    if pair.space is ColorSpace.YCBCR:
        ycc = PlanarImage(ColorSpace.YCBCR, np.stack([luma_plane, pair.chroma[0], pair.chroma[1]]))
        return ycbcr_to_rgb(ycc)
    raise WrongSpaceError(f"cannot merge luminance in {pair.space.name}")
