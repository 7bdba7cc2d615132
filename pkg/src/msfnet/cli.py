"""Command-line interface: train / eval / ablate / visualize.

Configuration comes from an optional YAML file (sections `train`,
`variant`, `data`) with individual flags overriding file values; the
dataset root falls back to the MSFNET_DATA_ROOT environment variable.
See the README for the schema and dataset directory layouts.
"""

import argparse
import dataclasses
import os
import sys

import numpy as np
import yaml

from .data import load_manifest_samples
from .harness import TrainConfig, ablate, evaluate, train, visualize
from .network import VARIANT_LADDER, NetworkVariant
from .synth import synth_generate

VARIANT_NAMES = {name: variant for name, variant in VARIANT_LADDER}


def load_config_file(path) -> dict:
    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise ValueError(f"config file {path} must contain a mapping")
    return cfg


def build_train_config(file_cfg: dict, args) -> TrainConfig:
    section = dict(file_cfg.get("train", {}))
    if "lambda" in section:  # YAML-friendly alias
        section["lambda_"] = section.pop("lambda")
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(section) - known
    if unknown:
        raise ValueError(f"unknown train config keys: {sorted(unknown)}")
    if "encoder_channels" in section:
        section["encoder_channels"] = tuple(section["encoder_channels"])
    for attr in ("seed", "epochs", "batch_size"):
        value = getattr(args, attr, None)
        if value is not None:
            section[attr] = value
    return TrainConfig(**section)


def build_variant(file_cfg: dict, args) -> NetworkVariant:
    if getattr(args, "variant", None):
        return VARIANT_NAMES[args.variant]
    section = file_cfg.get("variant")
    if section:
        return NetworkVariant(**section)
    return VARIANT_NAMES["baseline+USF+EDA+batch-loss"]


def load_dataset(file_cfg: dict, args, split: str, seed: int):
    data_cfg = dict(file_cfg.get("data", {}))
    dataset = getattr(args, "dataset", None) or data_cfg.get("dataset", "synthetic")
    limit = getattr(args, "limit", None) or data_cfg.get("limit")
    if dataset == "synthetic":
        count = getattr(args, "count", None) or data_cfg.get("synthetic_count", 64)
        size = getattr(args, "size", None) or data_cfg.get("synthetic_size", 64)
        # Disjoint generator streams per split.
        offset = {"train": 0, "test": 1, "val": 2}[split]
        return synth_generate(seed=seed * 10 + offset, count=count, size=size)
    root = getattr(args, "data_root", None) or data_cfg.get("root") \
        or os.environ.get("MSFNET_DATA_ROOT")
    if not root:
        raise SystemExit("no dataset root: pass --data-root or set MSFNET_DATA_ROOT")
    rng = np.random.default_rng(seed)
    return load_manifest_samples(root, dataset, split, rng=rng, limit=limit)


def _add_common(parser):
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--dataset", choices=("synthetic", "nyu", "kitti"))
    parser.add_argument("--data-root", dest="data_root", help="dataset root directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--limit", type=int, help="cap the number of samples")
    parser.add_argument("--count", type=int, help="synthetic sample count")
    parser.add_argument("--size", type=int, help="synthetic image size")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="msfnet",
                                     description="depth estimation training harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a network variant")
    _add_common(p_train)
    p_train.add_argument("--variant", choices=sorted(VARIANT_NAMES))
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--val", action="store_true",
                         help="evaluate on the test split each epoch")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", help="required unless --oracle is given")
    p_eval.add_argument("--split", default="test", choices=("train", "test"))
    p_eval.add_argument("--csv", help="write the metric report here")
    p_eval.add_argument("--oracle", action="store_true",
                        help="evaluate ground truth as the prediction")

    p_ablate = sub.add_parser("ablate", help="run the five-variant ladder")
    _add_common(p_ablate)
    p_ablate.add_argument("--epochs", type=int, default=None)
    p_ablate.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p_ablate.add_argument("--out", required=True)

    p_vis = sub.add_parser("visualize", help="render prediction panels")
    _add_common(p_vis)
    p_vis.add_argument("--checkpoint", required=True)
    p_vis.add_argument("--split", default="test", choices=("train", "test"))
    p_vis.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    file_cfg = load_config_file(args.config) if args.config else {}
    config = build_train_config(file_cfg, args)

    if args.command == "train":
        variant = build_variant(file_cfg, args)
        data = load_dataset(file_cfg, args, "train", config.seed)
        val = load_dataset(file_cfg, args, "test", config.seed) if args.val else None
        result = train(config, variant, data, val_dataset=val, out_dir=args.out)
        print(f"checkpoint: {result.checkpoint_path}")
        print(f"iteration log: {result.iter_log_path}")
        return 0

    if args.command == "eval":
        if not args.oracle and not args.checkpoint:
            raise SystemExit("eval needs --checkpoint (or --oracle)")
        data = load_dataset(file_cfg, args, args.split, config.seed)
        report = evaluate(args.checkpoint if not args.oracle else None, data,
                          csv_path=args.csv, inject_oracle=args.oracle)
        for name in ("rel", "rmse", "log10", "delta1", "delta2", "delta3"):
            print(f"{name:>7s}: {getattr(report, name):.4f}")
        print(f"images: {report.n_images}  pixels: {report.n_pixels}")
        return 0

    if args.command == "ablate":
        data = load_dataset(file_cfg, args, "train", config.seed)
        eval_data = load_dataset(file_cfg, args, "test", config.seed)
        _, table = ablate(config, data, eval_dataset=eval_data, out_dir=args.out)
        print(table)
        return 0

    if args.command == "visualize":
        data = load_dataset(file_cfg, args, args.split, config.seed)
        written = visualize(args.checkpoint, data, args.out)
        print(f"wrote {len(written)} files to {args.out}")
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
