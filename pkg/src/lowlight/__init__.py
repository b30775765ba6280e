"""Low-light image enhancement on the luminance channel.

The pipeline converts an RGB image to HSV or YCbCr, brightens the
luminance plane with a small self-calibrated illumination network trained
without paired references, and recombines it with the untouched chroma
planes. Enhanced outputs are scored against paired references with PSNR
and SSIM.
"""

from .color_space import (
    LumaChromaPair,
    hsv_to_rgb,
    merge_luma,
    rgb_to_hsv,
    rgb_to_ycbcr,
    split_luma,
    ycbcr_to_rgb,
)
from .dataset import DatasetSplit, read_manifest, scan_lol, scan_lol_v2, write_manifest
from .image_io import ColorSpace, PlanarImage, load_image, quantize_roundtrip, save_image
from .metrics import MetricsReport, psnr, ssim
from .pipeline import enhance_image, evaluate_split, inspect
from .sci_model import (
    CascadeTrace,
    SciWeights,
    cascade_forward,
    infer,
    init_weights,
    load_weights,
    save_weights,
    sci_loss,
)
from .trainer import TrainConfig, TrainHistory, resize_bilinear, train, validate

__version__ = "0.1.0"

__all__ = [
    "CascadeTrace",
    "ColorSpace",
    "DatasetSplit",
    "LumaChromaPair",
    "MetricsReport",
    "PlanarImage",
    "SciWeights",
    "TrainConfig",
    "TrainHistory",
    "cascade_forward",
    "enhance_image",
    "evaluate_split",
    "hsv_to_rgb",
    "infer",
    "init_weights",
    "inspect",
    "load_image",
    "load_weights",
    "merge_luma",
    "psnr",
    "quantize_roundtrip",
    "read_manifest",
    "resize_bilinear",
    "rgb_to_hsv",
    "rgb_to_ycbcr",
    "save_image",
    "save_weights",
    "scan_lol",
    "scan_lol_v2",
    "sci_loss",
    "split_luma",
    "ssim",
    "train",
    "validate",
    "write_manifest",
    "ycbcr_to_rgb",
]
