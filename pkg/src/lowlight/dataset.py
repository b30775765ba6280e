"""Discovery and splitting of paired low/normal-light image trees.

Two layouts are supported out of the box:

  LOL:        our485/low, our485/high, eval15/low, eval15/high
              (485 training pairs, 15 test pairs, 85 validation pairs drawn
              from training)
  LOL-v2 Real: Train/Low, Train/Normal, Test/Low, Test/Normal
              (689 training pairs, 100 test pairs, 188 validation pairs)

Pairs are matched by filename. The validation subset is a seeded shuffle of
the sorted training pairs, removed from the gradient-update set by default;
reference (high) images ride along in the split but are consumed only by
evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptySplitError, MissingDirectoryError, UnpairedImageError

Pair = tuple[Path, Path]  # (low path, high path)


@dataclass
class DatasetSplit:
    train: list[Pair] = field(default_factory=list)
    val: list[Pair] = field(default_factory=list)
    test: list[Pair] = field(default_factory=list)
    seed: int = 0

    def counts(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)


def _pair_dir(low_dir: Path, high_dir: Path) -> list[Pair]:
    for d in (low_dir, high_dir):
        if not d.is_dir():
            raise MissingDirectoryError(f"dataset directory missing: {d}")
    lows = {p.name: p for p in low_dir.iterdir() if p.suffix.lower() == ".png"}
    highs = {p.name: p for p in high_dir.iterdir() if p.suffix.lower() == ".png"}
    unpaired = sorted(set(lows) ^ set(highs))
    if unpaired:
        raise UnpairedImageError(
            f"{len(unpaired)} image(s) without a same-named pair between "
            f"{low_dir} and {high_dir}: {', '.join(unpaired[:10])}"
            + ("..." if len(unpaired) > 10 else "")
        )
    return [(lows[name], highs[name]) for name in sorted(lows)]


def _scan(
    root,
    seed: int,
    val_count: int,
    train_low: str,
    train_high: str,
    test_low: str,
    test_high: str,
    val_overlaps_train: bool,
) -> DatasetSplit:
    root = Path(root)
    if not root.is_dir():
        raise MissingDirectoryError(f"dataset root missing: {root}")
    train_pairs = _pair_dir(root / train_low, root / train_high)
    test_pairs = _pair_dir(root / test_low, root / test_high)
    if not train_pairs:
        raise EmptySplitError(f"no training pairs found under {root}")
    if val_count >= len(train_pairs):
        raise EmptySplitError(
            f"cannot draw {val_count} validation pairs from {len(train_pairs)} training pairs"
        )
    order = np.random.default_rng(seed).permutation(len(train_pairs))
    val = [train_pairs[i] for i in sorted(order[:val_count])]
    if val_overlaps_train:
        train = train_pairs
    else:
        train = [train_pairs[i] for i in sorted(order[val_count:])]
    return DatasetSplit(train=train, val=val, test=test_pairs, seed=seed)


def scan_lol(
    root,
    seed: int = 0,
    val_count: int = 85,
    train_low: str = "our485/low",
    train_high: str = "our485/high",
    test_low: str = "eval15/low",
    test_high: str = "eval15/high",
    val_overlaps_train: bool = False,
) -> DatasetSplit:
    """Split a LOL-layout tree: 485 train pairs -> (400 train, 85 val), 15 test."""
    return _scan(root, seed, val_count, train_low, train_high, test_low, test_high,
                 val_overlaps_train)


def scan_lol_v2(
    root,
    seed: int = 0,
    val_count: int = 188,
    train_low: str = "Train/Low",
    train_high: str = "Train/Normal",
    test_low: str = "Test/Low",
    test_high: str = "Test/Normal",
    val_overlaps_train: bool = False,
) -> DatasetSplit:
    """Split a LOL-v2 Real tree: 689 train pairs -> (501 train, 188 val), 100 test."""
    return _scan(root, seed, val_count, train_low, train_high, test_low, test_high,
                 val_overlaps_train)


def write_manifest(split: DatasetSplit, path) -> None:
    """Record seed and file lists so a published run is exactly reproducible."""
    payload = {
        "seed": split.seed,
        "counts": {"train": len(split.train), "val": len(split.val), "test": len(split.test)},
        "train": [[str(lo), str(hi)] for lo, hi in split.train],
        "val": [[str(lo), str(hi)] for lo, hi in split.val],
        "test": [[str(lo), str(hi)] for lo, hi in split.test],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_manifest(path) -> DatasetSplit:
    payload = json.loads(Path(path).read_text())
    return DatasetSplit(
        train=[(Path(lo), Path(hi)) for lo, hi in payload["train"]],
        val=[(Path(lo), Path(hi)) for lo, hi in payload["val"]],
        test=[(Path(lo), Path(hi)) for lo, hi in payload["test"]],
        seed=int(payload["seed"]),
    )
