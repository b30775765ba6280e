"""8-bit PNG decode/encode and the planar float image container.

Images live in memory as float32 planes (all of channel 0, then channel 1,
...), which keeps per-plane work -- luminance split/merge, convolution --
contiguous. Stored integer values map to floats as ``value / 255``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, WrongSpaceError


class ColorSpace(enum.Enum):
    RGB = "rgb"
    HSV = "hsv"
    YCBCR = "ycbcr"
    GRAY = "gray"


_CHANNELS = {ColorSpace.RGB: 3, ColorSpace.HSV: 3, ColorSpace.YCBCR: 3, ColorSpace.GRAY: 1}

# PIL modes we accept and how to coerce them to 8-bit RGB or grayscale.
_MODE_COERCE = {
    "RGB": "RGB",
    "RGBA": "RGB",   # alpha dropped
    "L": "L",
    "LA": "L",       # alpha dropped
    "P": "RGB",      # palette expands to 8-bit RGB
    "1": "L",
}


@dataclass
class PlanarImage:
    """H x W x C float32 image, channel planes stored contiguously.

    Value ranges by space:
      RGB / GRAY  -- all planes in [0, 1]
      HSV         -- H in [0, 1) (scaled from [0, 360)), S and V in [0, 1]
      YCBCR       -- Y in [0, 1], Cb and Cr in [-0.5, 0.5]
    """

    space: ColorSpace
    data: np.ndarray  # shape (channels, height, width)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ValueError(f"planar data must be 3-d (C,H,W), got shape {self.data.shape}")
        if self.data.shape[0] != _CHANNELS[self.space]:
            raise ValueError(
                f"{self.space.name} image needs {_CHANNELS[self.space]} planes, "
                f"got {self.data.shape[0]}"
            )

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def plane(self, idx: int) -> np.ndarray:
        return self.data[idx]

    def same_size(self, other: "PlanarImage") -> bool:
        return self.height == other.height and self.width == other.width

    def require_space(self, space: ColorSpace) -> None:
        if self.space is not space:
            raise WrongSpaceError(f"expected {space.name} image, got {self.space.name}")


def load_image(path) -> PlanarImage:
    """Decode an 8-bit PNG (RGB or grayscale) into an RGB PlanarImage.

    Grayscale is promoted to three identical planes; alpha, if present, is
    dropped. Raises FileNotFoundError for missing paths and
    :class:`DecodeError` for corrupt files or unsupported bit depths.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with Image.open(path) as im:
            if im.mode not in _MODE_COERCE:
                raise DecodeError(f"{path}: unsupported pixel mode {im.mode!r} (8-bit only)")
            im = im.convert(_MODE_COERCE[im.mode])
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise DecodeError(f"{path}: not a decodable image ({exc})") from exc
    except OSError as exc:
        raise DecodeError(f"{path}: decode failed ({exc})") from exc

    if arr.ndim == 2:  # grayscale: promote to 3 identical planes
        planes = np.repeat(arr[None, :, :], 3, axis=0)
    else:
        planes = arr.transpose(2, 0, 1)
    data = planes.astype(np.float32) / 255.0
    return PlanarImage(ColorSpace.RGB, data)


def save_image(img: PlanarImage, path) -> None:
    """Write an RGB PlanarImage as 8-bit PNG.

    Out-of-range values are clamped; quantization rounds half away from zero
    (0.5 * 255 = 127.5 -> 128).
    """
    img.require_space(ColorSpace.RGB)
    quant = quantize_u8(img.data)
    interleaved = quant.transpose(1, 2, 0)
    Image.fromarray(interleaved, mode="RGB").save(Path(path), format="PNG")


def quantize_u8(data: np.ndarray) -> np.ndarray:
    """clamp to [0,1], scale by 255, round half away from zero, as uint8."""
    clamped = np.clip(data, 0.0, 1.0).astype(np.float64)
    # values are non-negative, so half-away-from-zero == floor(x + 0.5)
    return np.floor(clamped * 255.0 + 0.5).astype(np.uint8)


def quantize_roundtrip(img: PlanarImage) -> PlanarImage:
    """Simulate a save/load cycle: 8-bit quantization without touching disk.

    Evaluation scores quantized outputs, matching how saved results would be
    scored.
    """
    img.require_space(ColorSpace.RGB)
    return PlanarImage(ColorSpace.RGB, quantize_u8(img.data).astype(np.float32) / 255.0)
