"""Command line: train on a dataset manifest, predict flows for images."""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from .networks import NetConfig
from .training import TrainedModel, train_multi, train_single


def _cmd_train(args) -> int:
    config = NetConfig(
        variant=args.variant,
        type=args.type,
        input_size=args.size,
        class_weight=args.class_weight,
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        val_fraction=args.val_fraction,
    )
    if args.variant == "single":
        model = train_single(args.manifest, args.type, config)
    else:
        model = train_multi(args.manifest, config)
    model.save(args.out)
    print(json.dumps({"weights": args.out, "finalEpoch": model.history[-1]}, indent=2))
    return 0


def _cmd_predict(args) -> int:
    from .inference import predict

    model = TrainedModel.load(args.weights)
    images = list(args.image or [])
    if args.images:
        images.extend(sorted(
            p for p in glob.glob(os.path.join(args.images, "*"))
            if p.lower().endswith((".png", ".jpg", ".jpeg", ".bmp"))
        ))
    if not images:
        print("error: no input images", file=sys.stderr)
        return 2
    written = [predict(model, p, args.out) for p in images]
    print(json.dumps({"count": len(written),
                      "outputs": [{"flow": f, "sidecar": s} for f, s in written]},
                     indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geopredict",
        description="Train and run single-image distortion-flow predictors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="weights file to write")
    p.add_argument("--variant", choices=("single", "multi"), default="multi")
    p.add_argument("--type", help="distortion family (single variant)")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--class-weight", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict flow + type sidecar for images")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--image", action="append", help="repeatable single image")
    p.add_argument("--images", help="directory of images")
    p.set_defaults(func=_cmd_predict)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
