"""Command-line driver for the toy pretrain / fine-tune protocol."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch

from .train import (TrainConfig, evaluate, finetune_segmentation,
                    pretrain_inpainting, run_baseline_matrix)
from .unet import UNetConfig, build_unet


def _config(args) -> TrainConfig:
    return TrainConfig(
        lr=args.lr, batch_size=args.batch_size,
        pretrain_epochs=args.pretrain_epochs,
        finetune_epochs=args.finetune_epochs, seed=args.seed,
    )


def _add_train_flags(parser):
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--batch-size", type=int, default=2)
    parser.add_argument("--pretrain-epochs", type=int, default=5)
    parser.add_argument("--finetune-epochs", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)


def cmd_pretrain(args) -> int:
    cfg = _config(args)
    torch.manual_seed(cfg.seed)
    model = build_unet(UNetConfig(in_channels=args.channels,
                                  out_channels=args.channels,
                                  final_activation="linear"))
    checkpoint = pretrain_inpainting(model, args.manifest, cfg)
    torch.save(checkpoint, args.out)
    first = checkpoint["history"][0]["val_masked_mse"]
    last = checkpoint["history"][-1]["val_masked_mse"]
    print(f"masked-mse epoch0={first:.5f} final={last:.5f} "
          f"best-epoch={checkpoint['best_epoch']}")
    return 0


def cmd_finetune(args) -> int:
    cfg = _config(args)
    checkpoint = torch.load(args.checkpoint, weights_only=False) \
        if args.checkpoint else None
    tuned = finetune_segmentation(checkpoint, args.train, cfg)
    torch.save(tuned, args.out)
    last = tuned["history"][-1]
    print(f"train-dice={last['train_dice']:.3f} val-dice={last['val_dice']:.3f} "
          f"best-epoch={tuned['best_epoch']}")
    return 0


def cmd_evaluate(args) -> int:
    checkpoint = torch.load(args.checkpoint, weights_only=False)
    report = evaluate(checkpoint, args.data, threshold=args.threshold)
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        std = f"{report['std']:.3f}".lstrip("0")
        print(f"{report['mean']:.3f} ({std})")
    return 0


def cmd_matrix(args) -> int:
    manifests = {}
    for item in args.manifest:
        strategy, _, path = item.partition("=")
        if not path:
            print(f"error: --manifest expects strategy=path, got {item!r}",
                  file=sys.stderr)
            return 2
        manifests[strategy] = path
    cfg = _config(args)
    results = run_baseline_matrix(args.train, args.test, manifests, cfg,
                                  seeds=args.seeds)
    Path(args.out).write_text(json.dumps(
        {k: v for k, v in results.items() if k != "table"},
        indent=2, sort_keys=True) + "\n")
    print(results["table"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svxtrain",
        description="pretrain a 3D U-net on synthesized inpainting pairs, "
                    "fine-tune it for segmentation, evaluate Dice")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="inpainting pretraining on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--channels", type=int, default=2)
    _add_train_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="segmentation fine-tuning")
    p.add_argument("--train", required=True, help="training-set listing JSON")
    p.add_argument("--checkpoint", help="inpainting checkpoint to start from")
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="Dice of a checkpoint over a listing")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("matrix", help="all six baselines over several seeds")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--manifest", action="append", default=[],
                   metavar="STRATEGY=PATH")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--out", default="results.json")
    _add_train_flags(p)
    p.set_defaults(func=cmd_matrix)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
