"""Defect-detection command-line entry point.

This module provides the ``defectnet`` command with the synth, train, eval,
bench and infer subcommands.
"""

import argparse
import logging
import sys
from typing import List, Optional

from ..common.cli_helpers import (
    add_common_args,
    add_log_level_arg,
    parse_image_size,
    run_command,
)
from ..common.config import ANNOTATION_KINDS, DTYPES, LOSS_TYPES, RESOLUTIONS
from .commands import cmd_bench, cmd_eval, cmd_infer, cmd_synth, cmd_train

logger = logging.getLogger("defectnet")


def _add_train_overrides(parser: argparse.ArgumentParser):
    parser.add_argument("--dataset", default=None, help="Dataset root directory")
    parser.add_argument(
        "--image-size", type=parse_image_size, default=None, help="Resize images to HxW"
    )
    parser.add_argument("--loss", choices=LOSS_TYPES, default=None, help="Pixel loss")
    parser.add_argument("--annotation", choices=ANNOTATION_KINDS, default=None)
    parser.add_argument("--resolution", choices=RESOLUTIONS, default=None)
    parser.add_argument("--rotate", dest="rotate", action="store_const", const=True, default=None)
    parser.add_argument("--no-rotate", dest="rotate", action="store_const", const=False)
    parser.add_argument("--subsample-positives", type=int, default=None)
    parser.add_argument("--dtype", choices=DTYPES, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="defectnet", description="Two-stage surface-defect detection"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="Generate a synthetic defect dataset")
    synth.add_argument("--pos", type=int, required=True, help="Defective images")
    synth.add_argument("--neg", type=int, required=True, help="Defect-free images")
    synth.add_argument("--size", type=parse_image_size, default=(256, 256), help="Image HxW")
    synth.add_argument("--seed", type=int, default=None, help="Random seed (default: 0)")
    synth.add_argument("--out", default=None, help="Output directory")
    add_log_level_arg(synth)
    synth.set_defaults(func=cmd_synth)

    train = sub.add_parser("train", help="Train both stages on every cross-validation fold")
    add_common_args(train)
    _add_train_overrides(train)
    train.add_argument("--lr-segmentation", type=float, default=None)
    train.add_argument("--lr-decision", type=float, default=None)
    train.add_argument("--steps", type=int, default=None, help="Segmentation steps")
    train.add_argument("--decision-steps", type=int, default=None, help="Decision steps")
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("eval", help="Evaluate trained folds and write reports")
    add_common_args(evaluate, out_help="Run directory holding the fold models")
    _add_train_overrides(evaluate)
    evaluate.add_argument(
        "--grid", action="store_true", help="Evaluate the whole configuration grid"
    )
    evaluate.add_argument("--report-dir", default=None, help="Default: <run dir>/eval")
    evaluate.set_defaults(func=cmd_eval)

    bench = sub.add_parser("bench", help="Time the forward pass")
    bench.add_argument("--weights", default=None, help="Weight file (default: random init)")
    bench.add_argument(
        "--size",
        type=parse_image_size,
        action="append",
        default=None,
        help="Input HxW, repeatable (default: 1408x512 and 704x256)",
    )
    bench.add_argument("--repeats", type=int, default=10)
    bench.add_argument("--warmup", type=int, default=1)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--dtype", choices=DTYPES, default="float32")
    bench.add_argument("--out", default=None, help="Directory for bench.yaml")
    add_log_level_arg(bench)
    bench.set_defaults(func=cmd_bench)

    infer = sub.add_parser("infer", help="Score one image")
    infer.add_argument("image", help="Grayscale image file")
    infer.add_argument("--weights", required=True, help="Weight file")
    infer.add_argument("--prob-map", default=None, help="Write the probability map as PNG")
    infer.add_argument("--image-size", type=parse_image_size, default=None)
    add_log_level_arg(infer)
    infer.set_defaults(func=cmd_infer)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments and dispatch to the subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    return run_command(args.func, args, logger)


if __name__ == "__main__":
    sys.exit(main())
