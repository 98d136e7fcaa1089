"""Command-line front end: ``harness train`` and ``harness predict``."""
from __future__ import annotations

import argparse
import json
import sys

from .config import HarnessError, load_config
from .predict import predict_manifest
from .train import train

_ERRORS = (HarnessError, OSError, ValueError)


def _cmd_train(args: argparse.Namespace) -> int:
    config, extras = load_config(args.config)
    manifest = args.manifest or extras.get("manifest")
    out_dir = args.out or extras.get("out_dir")
    if not manifest:
        raise HarnessError("no manifest given (flag --manifest or config "
                           "key \"manifest\")")
    if not out_dir:
        raise HarnessError("no output directory given (flag --out or "
                           "config key \"out_dir\")")
    result = train(config, manifest, out_dir)
    print(json.dumps({
        "checkpoint": str(result.checkpoint_path),
        "epochs": len(result.epoch_losses),
        "first_epoch_loss": result.epoch_losses[0],
        "final_epoch_loss": result.epoch_losses[-1],
        "eval_predictions": [str(p) for p in result.eval_predictions],
    }, indent=2, sort_keys=True))
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    path = predict_manifest(args.checkpoint, args.manifest, args.split,
                            args.out)
    rows = sum(1 for _ in path.open()) - 1
    print(json.dumps({"written": str(path), "rows": rows},
                     indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harness",
        description="Toy two-pathway video classifier over clip manifests")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser(
        "train", help="train on a manifest's train split")
    p_train.add_argument("--config", required=True,
                         help="JSON file of hyperparameters (may also carry "
                              "manifest/out_dir paths)")
    p_train.add_argument("--manifest", help="manifest NDJSON path "
                                            "(overrides the config file)")
    p_train.add_argument("--out", help="output directory for checkpoint and "
                                       "prediction CSVs")
    p_train.set_defaults(func=_cmd_train)

    p_predict = sub.add_parser(
        "predict", help="score one manifest split with a checkpoint")
    p_predict.add_argument("--checkpoint", required=True)
    p_predict.add_argument("--manifest", required=True)
    p_predict.add_argument("--split", default="test",
                           choices=("train", "val", "test"))
    p_predict.add_argument("--out", required=True,
                           help="prediction CSV to write")
    p_predict.set_defaults(func=_cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
