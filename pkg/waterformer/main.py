import argparse
import logging
import sys

from .commands import ablate, enhance, evaluate, inspect, synthesize, train
from .errors import WaterFormerError

logger = logging.getLogger("waterformer")

COMMANDS = (synthesize, train, enhance, evaluate, ablate, inspect)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="waterformer",
        description="Physics-guided transformer for underwater image enhancement.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug detail to stderr")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def _configure_logging(verbose: bool) -> None:
    # No-op when the root logger already has handlers (embedding apps, pytest).
    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def main(argv: list[str] | None = None) -> int:
    """Run one subcommand and return its exit code (0 ok, 2 usage, 3 data, 4 runtime)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    _configure_logging(args.verbose)

    try:
        return args.handler(args)
    except WaterFormerError as exc:
        logger.error("%s", exc.detail)
        return exc.exit_code


def cli() -> None:
    sys.exit(main())
