"""End-to-end enhancement, channel histogram inspection, and evaluation.

The enhancement path mirrors the flow: convert the RGB input to HSV or
YCbCr, enhance the luminance plane with the single-block network, and
recombine with the untouched chroma planes. RGB mode skips the conversion
and runs the three-channel image through the network directly (the
baseline the luminance modes are compared against).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .color_space import LumaChromaPair, merge_luma, rgb_to_hsv, rgb_to_ycbcr, split_luma
from .dataset import DatasetSplit
from .errors import EmptySplitError, ModeMismatchError, PipelineError
from .image_io import ColorSpace, PlanarImage, load_image, quantize_roundtrip
from .metrics import MetricsReport, psnr, ssim
from .sci_model import SciWeights, infer

log = logging.getLogger(__name__)

HIST_BINS = 256

_CHANNEL_NAMES = {
    ColorSpace.HSV: ("H", "S", "V"),
    ColorSpace.YCBCR: ("Y", "Cb", "Cr"),
    ColorSpace.RGB: ("R", "G", "B"),
}


def enhance_image(rgb: PlanarImage, space: ColorSpace, weights: SciWeights) -> PlanarImage:
    """Enhance one image: split luminance, infer, recombine.

    Chroma planes pass through untouched in HSV/YCbCr modes. The weights'
    channel count must match the mode (1 for HSV/YCbCr, 3 for RGB).
    """
    want = 3 if space is ColorSpace.RGB else 1
    if weights.in_channels != want:
        raise ModeMismatchError(
            f"{space.name} mode needs {want}-channel weights, got {weights.in_channels}"
        )
    if space is ColorSpace.RGB:
        return infer(rgb, weights)
    pair = split_luma(rgb, space)
    enhanced = infer(pair.luma, weights)
    out, _ = merge_luma(LumaChromaPair(luma=enhanced, chroma=pair.chroma, space=space))
    return out


@dataclass
class ChannelHistogram:
    """256-bin histogram; bin k covers [k/256, (k+1)/256), last bin closed."""

    channel: str
    counts: np.ndarray
    total: int


@dataclass
class InspectReport:
    space: ColorSpace
    histograms: list[ChannelHistogram]
    luma_mean: float
    luma_p99: float


def _bin_plane(plane: np.ndarray) -> np.ndarray:
    idx = np.floor(plane.astype(np.float64) * HIST_BINS).astype(np.int64)
    idx = np.clip(idx, 0, HIST_BINS - 1)  # closes the last bin at 1.0
    return np.bincount(idx.ravel(), minlength=HIST_BINS)


def inspect(rgb: PlanarImage, space: ColorSpace) -> InspectReport:
    """Per-channel histograms in the chosen space, plus luminance statistics.

    Cb and Cr are shifted by +0.5 into [0, 1] for binning. The luminance
    stats (mean and 99th percentile) quantify how compressed the brightness
    channel is.
    """
    if space is ColorSpace.HSV:
        planes = rgb_to_hsv(rgb).data
        luma = planes[2]
    elif space is ColorSpace.YCBCR:
        planes = rgb_to_ycbcr(rgb).data.copy()
        luma = planes[0].copy()
        planes[1] += 0.5
        planes[2] += 0.5
    elif space is ColorSpace.RGB:
        rgb.require_space(ColorSpace.RGB)
        planes = rgb.data
        luma = rgb.data.max(axis=0)  # hexcone brightness for the stats
    else:
        raise ValueError(f"cannot inspect {space.name}")

    names = _CHANNEL_NAMES[space]
    total = rgb.height * rgb.width
    hists = [ChannelHistogram(names[c], _bin_plane(planes[c]), total) for c in range(3)]
    return InspectReport(
        space=space,
        histograms=hists,
        luma_mean=float(np.mean(luma, dtype=np.float64)),
        luma_p99=float(np.percentile(luma, 99.0)),
    )


def histogram_tsv_lines(report: InspectReport) -> list[str]:
    lines = [f"# space={report.space.name} luma_mean={report.luma_mean:.6f} "
             f"luma_p99={report.luma_p99:.6f}"]
    for hist in report.histograms:
        lines.append(f"# channel={hist.channel}")
        lines.extend(f"{k}\t{int(hist.counts[k])}" for k in range(HIST_BINS))
    return lines


def write_histogram_tsv(report: InspectReport, path) -> None:
    Path(path).write_text("\n".join(histogram_tsv_lines(report)) + "\n")


def write_histogram_svg(report: InspectReport, path) -> None:
    """Plain SVG bar plots, one row per channel; no raster dependencies."""
    width, row_h, pad = 532, 120, 20
    rows = []
    for i, hist in enumerate(report.histograms):
        top = pad + i * (row_h + pad)
        peak = max(1, int(hist.counts.max()))
        bars = []
        for k in range(HIST_BINS):
            h = row_h * int(hist.counts[k]) / peak
            if h <= 0:
                continue
            bars.append(
                f'<rect x="{pad + 2 * k}" y="{top + row_h - h:.2f}" '
                f'width="2" height="{h:.2f}" fill="#4477aa"/>'
            )
        rows.append(
            f'<text x="{pad}" y="{top - 5}" font-size="12">{hist.channel}</text>'
            + "".join(bars)
        )
    height = pad + len(report.histograms) * (row_h + pad)
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
        + "".join(rows)
        + "</svg>"
    )
    Path(path).write_text(svg + "\n")


def evaluate_split(
    split: DatasetSplit,
    weights: SciWeights,
    space: ColorSpace,
    out_dir=None,
    ssim_mode: str = "rgb_mean",
) -> MetricsReport:
    """Enhance every test pair at native resolution and score against references.

    Outputs are run through an 8-bit quantization round trip before scoring,
    matching how saved results would be measured. Per-image failures are
    skipped with a warning.
    """
    if not split.test:
        raise EmptySplitError("test split is empty")
    report = MetricsReport()
    for low, high in split.test:
        try:
            enhanced = enhance_image(load_image(low), space, weights)
            reference = load_image(high)
            scored = quantize_roundtrip(enhanced)
            report.add(Path(low).name, psnr(scored, reference), ssim(scored, reference, ssim_mode))
        except (PipelineError, OSError) as exc:
            log.warning("skipping test pair %s / %s: %s", low, high, exc)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report.write_tsv(out_dir / "metrics.tsv")
        report.write_json(out_dir / "metrics.json")
    return report
