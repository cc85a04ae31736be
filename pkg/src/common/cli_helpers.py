"""CLI argument parsing helpers.

This module provides the argument patterns shared by every subcommand and
the translation of package errors into process exit codes.
"""

import argparse
import logging
import sys
from typing import Callable, Optional

from .errors import DefectNetError

EXIT_OK = 0
EXIT_FAILURE = 1


def add_log_level_arg(parser: argparse.ArgumentParser):
    """Add log level argument to parser.

    Args:
        parser: ArgumentParser instance
    """
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging level (default: from config, else INFO)",
    )


def add_common_args(parser: argparse.ArgumentParser, out_help: str = "Run output directory"):
    """Add --config, --seed, --out and --jobs to a subcommand parser.

    Args:
        parser: ArgumentParser instance
        out_help: Help text for --out
    """
    parser.add_argument("--config", default=None, help="YAML run configuration file")
    parser.add_argument("--seed", type=int, default=None, help="Random seed (overrides config)")
    parser.add_argument("--out", default=None, help=out_help)
    parser.add_argument(
        "--jobs", type=int, default=None, help="Folds/configurations run concurrently"
    )
    add_log_level_arg(parser)


def parse_image_size(text: str):
    """Parse ``HxW`` (or a single side) into (height, width).

    Raises:
        argparse.ArgumentTypeError: On malformed input
    """
    try:
        parts = [int(p) for p in text.lower().split("x")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid size '{text}'") from e
    if len(parts) == 1:
        return parts[0], parts[0]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"invalid size '{text}', expected HxW")
    return parts[0], parts[1]


def run_command(
    command: Callable[[argparse.Namespace], Optional[int]],
    args: argparse.Namespace,
    logger: logging.Logger,
) -> int:
    """Run a subcommand and map errors to exit codes.

    Package errors exit with their class's ``exit_code`` (2 configuration,
    3 data, 4 numeric, 5 weight file); anything else exits with 1.

    Returns:
        Process exit code
    """
    try:
        result = command(args)
        return EXIT_OK if result is None else int(result)
    except DefectNetError as e:
        logger.error("%s", e)
        if e.details:
            logger.debug("Error details: %s", e.details)
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return EXIT_FAILURE
    except Exception as e:  # pylint: disable=broad-exception-caught
        logger.exception("Unexpected error")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
