"""Command-line surface: train, enhance, eval, inspect, split.

Exit codes: 0 success, 1 usage error, 2 data error (missing files, bad
config, malformed checkpoints).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import dataset, pipeline, trainer
from .errors import ConfigError, PipelineError
from .image_io import ColorSpace, load_image, save_image
from .sci_model import load_weights, save_weights
from .trainer import TrainConfig

log = logging.getLogger(__name__)

_SPACES = {"hsv": ColorSpace.HSV, "ycbcr": ColorSpace.YCBCR, "rgb": ColorSpace.RGB}
_SCANNERS = {"lol": dataset.scan_lol, "lolv2": dataset.scan_lol_v2}


@dataclass
class RunConfig:
    """Every training knob plus dataset/output/metric settings, JSON-serializable."""

    train: TrainConfig
    ssim_mode: str = "rgb_mean"
    dataset_root: str | None = None
    dataset_kind: str = "lol"
    output_dir: str = "runs"
    val_overlaps_train: bool = False
    # dataset directory overrides; None keeps the kind's defaults
    train_low_dir: str | None = None
    train_high_dir: str | None = None
    test_low_dir: str | None = None
    test_high_dir: str | None = None

    _TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
    _EXTRA_KEYS = {
        "ssim_mode", "dataset_root", "dataset_kind", "output_dir", "val_overlaps_train",
        "train_low_dir", "train_high_dir", "test_low_dir", "test_high_dir",
    }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = sorted(set(raw) - cls._TRAIN_KEYS - cls._EXTRA_KEYS)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        train_kwargs = {k: v for k, v in raw.items() if k in cls._TRAIN_KEYS}
        if "resize_to" in train_kwargs:
            train_kwargs["resize_to"] = tuple(train_kwargs["resize_to"])
        try:
            train = TrainConfig(**train_kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad training config: {exc}") from exc
        extras = {k: v for k, v in raw.items() if k in cls._EXTRA_KEYS}
        cfg = cls(train=train, **extras)
        if cfg.ssim_mode not in ("rgb_mean", "luma"):
            raise ConfigError(f"ssim_mode must be rgb_mean or luma, got {cfg.ssim_mode!r}")
        if cfg.dataset_kind not in _SCANNERS:
            raise ConfigError(f"dataset_kind must be lol or lolv2, got {cfg.dataset_kind!r}")
        return cfg

    @classmethod
    def from_json_file(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        """Flat echo of every effective value, defaults included."""
        out = dataclasses.asdict(self.train)
        out["color_space"] = self.train.color_space.value
        out["resize_to"] = list(self.train.resize_to)
        for key in sorted(self._EXTRA_KEYS):
            out[key] = getattr(self, key)
        return out

    def scan(self, root=None, kind: str | None = None, seed: int | None = None):
        kind = kind or self.dataset_kind
        root = root or self.dataset_root
        if root is None:
            raise ConfigError("no dataset root given (flag --dataset or config dataset_root)")
        kwargs = {"seed": self.train.seed if seed is None else seed,
                  "val_overlaps_train": self.val_overlaps_train}
        for arg, attr in (("train_low", "train_low_dir"), ("train_high", "train_high_dir"),
                          ("test_low", "test_low_dir"), ("test_high", "test_high_dir")):
            value = getattr(self, attr)
            if value is not None:
                kwargs[arg] = value
        return _SCANNERS[kind](root, **kwargs)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2; we want 1
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lowlight", description="Luminance-channel low-light enhancement")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train on the low-light half of a paired dataset")
    p_train.add_argument("--config", help="JSON run configuration")
    p_train.add_argument("--dataset", help="dataset root directory")
    p_train.add_argument("--kind", choices=sorted(_SCANNERS), help="dataset layout")
    p_train.add_argument("--out", help="output directory (weights, history, config echo)")

    p_enh = sub.add_parser("enhance", help="enhance one PNG or a directory of PNGs")
    p_enh.add_argument("--weights", required=True)
    p_enh.add_argument("--space", required=True, choices=sorted(_SPACES))
    p_enh.add_argument("--in", dest="input", required=True)
    p_enh.add_argument("--out", required=True, help="output directory")

    p_eval = sub.add_parser("eval", help="score enhanced test images against references")
    p_eval.add_argument("--weights", required=True)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--kind", choices=sorted(_SCANNERS), default="lol")
    p_eval.add_argument("--space", required=True, choices=sorted(_SPACES))
    p_eval.add_argument("--config", help="JSON run configuration")
    p_eval.add_argument("--out", help="report directory")
    p_eval.add_argument("--seed", type=int, default=None, help="split seed override")

    p_ins = sub.add_parser("inspect", help="channel histograms of one image")
    p_ins.add_argument("--in", dest="input", required=True)
    p_ins.add_argument("--space", required=True, choices=sorted(_SPACES))
    p_ins.add_argument("--out", help="TSV path (stdout if omitted)")
    p_ins.add_argument("--svg", help="optional SVG bar plot path")

    p_split = sub.add_parser("split", help="emit a reproducible split manifest")
    p_split.add_argument("--dataset", required=True)
    p_split.add_argument("--kind", choices=sorted(_SCANNERS), default="lol")
    p_split.add_argument("--seed", type=int, default=0)
    p_split.add_argument("--out", help="manifest path (stdout if omitted)")
    return parser


def _load_run_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig(train=TrainConfig())
    return RunConfig.from_json_file(path)


def _cmd_train(args) -> int:
    cfg = _load_run_config(args.config)
    out_dir = Path(args.out or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.train.checkpoint_dir is None:
        cfg.train.checkpoint_dir = str(out_dir)
    split = cfg.scan(root=args.dataset, kind=args.kind)
    (out_dir / "effective_config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    dataset.write_manifest(split, out_dir / "split_manifest.json")

    weights, history = trainer.train(cfg.train, split)
    save_weights(weights, out_dir / "best.sciw")
    history.write_tsv(out_dir / "history.tsv")
    print(f"stopped: {history.stop_reason} after {history.epochs} epochs "
          f"(best epoch {history.best_epoch}, val loss {min(history.val_losses):.6f})")
    print(f"weights: {out_dir / 'best.sciw'}")
    return 0


def _cmd_enhance(args) -> int:
    weights = load_weights(args.weights)
    space = _SPACES[args.space]
    src = Path(args.input)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if src.is_dir():
        files = sorted(p for p in src.iterdir() if p.suffix.lower() == ".png")
        if not files:
            raise PipelineError(f"no PNG files in {src}")
    else:
        files = [src]
    done = 0
    for path in files:
        try:
            save_image(pipeline.enhance_image(load_image(path), space, weights),
                       out_dir / path.name)
            done += 1
        except (PipelineError, OSError) as exc:
            if len(files) == 1:
                raise
            log.warning("skipping %s: %s", path, exc)
    print(f"enhanced {done}/{len(files)} image(s) into {out_dir}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_run_config(args.config)
    weights = load_weights(args.weights)
    split = cfg.scan(root=args.dataset, kind=args.kind, seed=args.seed)
    out_dir = args.out or cfg.output_dir
    report = pipeline.evaluate_split(split, weights, _SPACES[args.space],
                                     out_dir=out_dir, ssim_mode=cfg.ssim_mode)
    for name, p, s in report.rows:
        print(f"{name}\t{p:.4f}\t{s:.4f}")
    print(f"mean\t{report.mean_psnr:.4f}\t{report.mean_ssim:.4f}  ({report.count} images)")
    return 0


def _cmd_inspect(args) -> int:
    report = pipeline.inspect(load_image(args.input), _SPACES[args.space])
    if args.out:
        pipeline.write_histogram_tsv(report, args.out)
    else:
        print("\n".join(pipeline.histogram_tsv_lines(report)))
    if args.svg:
        pipeline.write_histogram_svg(report, args.svg)
    return 0


def _cmd_split(args) -> int:
    split = _SCANNERS[args.kind](args.dataset, seed=args.seed)
    out = args.out or "split_manifest.json"
    dataset.write_manifest(split, out)
    train_n, val_n, test_n = split.counts()
    print(f"split seed={split.seed}: train={train_n} val={val_n} test={test_n}")
    print(f"manifest: {out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "enhance": _cmd_enhance,
    "eval": _cmd_eval,
    "inspect": _cmd_inspect,
    "split": _cmd_split,
}


def cli_main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (PipelineError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
