"""Per-image unsupervised training loop with validation-loss early stopping.

Each epoch walks the training images in a seed-shuffled order, running the
cascade forward, the loss backward, and one ADAM step per image (batch size
is fixed at one). Validation is forward-only on the held-out pairs; training
halts when the validation loss stops improving for `patience` epochs or at
the epoch cap, and the weights returned are from the best validation epoch.
Reference images are never read here -- the loss is unsupervised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .color_space import split_luma
from .dataset import DatasetSplit, Pair
from .errors import EmptySplitError, PipelineError
from .image_io import ColorSpace, PlanarImage, load_image
from .nn_core import AdamState, adam_step
from .sci_model import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_EPSILON,
    DEFAULT_HIDDEN,
    DEFAULT_SIGMA,
    DEFAULT_STAGES,
    SciWeights,
    cascade_forward,
    init_weights,
    save_weights,
    sci_loss,
)

log = logging.getLogger(__name__)

EARLY_STOP = "EARLY_STOP"
EPOCH_CAP = "EPOCH_CAP"


@dataclass
class TrainConfig:
    lr: float = 3e-4
    max_epochs: int = 1000
    batch: int = 1                      # fixed at one
    patience: int = 50
    min_delta: float = 1e-6
    resize_to: tuple[int, int] = (400, 600)   # (height, width)
    stages: int = DEFAULT_STAGES
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    sigma: float = DEFAULT_SIGMA
    hidden_channels: int = DEFAULT_HIDDEN
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    color_space: ColorSpace = ColorSpace.YCBCR
    checkpoint_dir: str | None = None
    checkpoint_every: int = 25

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch != 1:
            raise ValueError("batch size is fixed at one")
        if isinstance(self.color_space, str):
            self.color_space = ColorSpace(self.color_space.lower())
        self.resize_to = (int(self.resize_to[0]), int(self.resize_to[1]))

    @property
    def in_channels(self) -> int:
        return 3 if self.color_space is ColorSpace.RGB else 1


@dataclass
class TrainHistory:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0                 # 1-based
    stop_reason: str = EPOCH_CAP

    @property
    def epochs(self) -> int:
        return len(self.train_losses)

    def write_tsv(self, path) -> None:
        lines = [
            f"{epoch}\t{tr:.8f}\t{va:.8f}"
            for epoch, (tr, va) in enumerate(zip(self.train_losses, self.val_losses), start=1)
        ]
        lines.append(f"# stop={self.stop_reason} best={self.best_epoch}")
        Path(path).write_text("\n".join(lines) + "\n")


def resize_bilinear(img: PlanarImage, height: int, width: int) -> PlanarImage:
    """Channelwise bilinear resample with corner-aligned endpoints."""
    if height < 1 or width < 1:
        raise ValueError("target size must be >= 1")
    if (height, width) == (img.height, img.width):
        return PlanarImage(img.space, img.data.copy())

    def axis_coords(n_out: int, n_in: int):
        if n_out == 1 or n_in == 1:
            coords = np.zeros(n_out, dtype=np.float64)
        else:
            coords = np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)
        lo = np.clip(np.floor(coords).astype(np.int64), 0, n_in - 1)
        hi = np.clip(lo + 1, 0, n_in - 1)
        frac = (coords - lo).astype(np.float32)
        return lo, hi, frac

    r_lo, r_hi, r_f = axis_coords(height, img.height)
    c_lo, c_hi, c_f = axis_coords(width, img.width)

    rows = img.data[:, r_lo, :] * (1.0 - r_f)[None, :, None] \
        + img.data[:, r_hi, :] * r_f[None, :, None]
    out = rows[:, :, c_lo] * (1.0 - c_f)[None, None, :] + rows[:, :, c_hi] * c_f[None, None, :]
    return PlanarImage(img.space, out)


def prepare_plane(path, cfg: TrainConfig) -> PlanarImage:
    """Load, resize to the training resolution, and extract the network input.

    HSV/YCbCr modes train on the luminance plane; RGB mode feeds the whole
    three-channel image through.
    """
    rgb = resize_bilinear(load_image(path), *cfg.resize_to)
    if cfg.color_space is ColorSpace.RGB:
        return rgb
    return split_luma(rgb, cfg.color_space).luma


def validate(weights: SciWeights, images: list[Pair], cfg: TrainConfig, cache=None) -> float:
    """Mean forward-only loss over the validation pairs. Never touches weights."""
    if not images:
        raise EmptySplitError("validation set is empty")
    total = 0.0
    for low, _ in images:
        plane = _cached_plane(low, cfg, cache)
        trace = cascade_forward(plane, weights, cfg.stages)
        loss, _ = sci_loss(trace, cfg.alpha, cfg.beta, cfg.sigma, compute_grads=False)
        total += loss
    return total / len(images)


def _cached_plane(path, cfg: TrainConfig, cache) -> PlanarImage:
    if cache is None:
        return prepare_plane(path, cfg)
    key = str(path)
    if key not in cache:
        cache[key] = prepare_plane(path, cfg)
    return cache[key]


def train(cfg: TrainConfig, split: DatasetSplit) -> tuple[SciWeights, TrainHistory]:
    """Run the full protocol; returns the best-validation-epoch weights."""
    if not split.train:
        raise EmptySplitError("training set is empty")
    if not split.val:
        raise EmptySplitError("validation set is empty")

    weights = init_weights(cfg.in_channels, cfg.hidden_channels, cfg.epsilon, cfg.seed)
    params = weights.parameters()
    state = AdamState.for_params(params)
    rng = np.random.default_rng(cfg.seed)
    cache: dict[str, PlanarImage] = {}
    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    history = TrainHistory()
    best_val = np.inf
    best_weights = weights.copy()
    epochs_since_best = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(split.train))
        epoch_losses = []
        failures = 0
        for idx in order:
            low, _ = split.train[idx]
            try:
                plane = _cached_plane(low, cfg, cache)
            except (PipelineError, OSError) as exc:
                failures += 1
                log.warning("skipping unreadable training image %s: %s", low, exc)
                continue
            trace = cascade_forward(plane, weights, cfg.stages)
            loss, grads = sci_loss(trace, cfg.alpha, cfg.beta, cfg.sigma)
            adam_step(params, grads, state, cfg.lr)
            epoch_losses.append(loss)
        if not epoch_losses:
            raise EmptySplitError(f"all {failures} training images failed to load")

        val_loss = validate(weights, split.val, cfg, cache)
        history.train_losses.append(float(np.mean(epoch_losses)))
        history.val_losses.append(val_loss)

        if val_loss < best_val - cfg.min_delta:
            best_val = val_loss
            best_weights = weights.copy()
            history.best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1

        log.info("epoch %d: train %.6f val %.6f (best %.6f @ %d)",
                 epoch, history.train_losses[-1], val_loss, best_val, history.best_epoch)
        if ckpt_dir and epoch % cfg.checkpoint_every == 0:
            save_weights(best_weights, ckpt_dir / "best.sciw")
            history.write_tsv(ckpt_dir / "history.tsv")

        if epochs_since_best >= cfg.patience:
            history.stop_reason = EARLY_STOP
            break
    else:
        history.stop_reason = EPOCH_CAP

    if ckpt_dir:
        save_weights(best_weights, ckpt_dir / "best.sciw")
        history.write_tsv(ckpt_dir / "history.tsv")
    return best_weights, history
