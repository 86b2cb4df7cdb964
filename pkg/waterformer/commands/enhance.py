"""``waterformer enhance``: run a checkpoint over images."""

import argparse
import logging
import time
from pathlib import Path

from .. import image_io
from ..checkpoint import load_checkpoint
from ..net.waterformer import count_macs, count_params, enhance_image
from .common import format_count

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("enhance", help="enhance underwater images with a trained checkpoint")
    parser.add_argument("--checkpoint", type=Path, required=True, help="WFK1 checkpoint to load")
    parser.add_argument("--input", type=Path, required=True, help="an image file or a directory of images")
    parser.add_argument("--output", type=Path, required=True, help="directory for the enhanced PNGs")
    parser.add_argument("--macs-size", type=int, default=256, help="square resolution the MAC count is reported at")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    state = load_checkpoint(args.checkpoint, restore_rng=False)
    logger.info("loaded %s (epoch %d, variant %s)", args.checkpoint, state.epoch, state.config.variant)
    net = state.model
    inputs = image_io.list_images(args.input) if args.input.is_dir() else [args.input]

    for path in inputs:
        image = image_io.read_image(path)
        start = time.perf_counter()
        enhanced = enhance_image(net, image)
        elapsed = time.perf_counter() - start
        target = args.output / f"{path.stem}.png"
        image_io.write_png(target, enhanced)
        print(f"{path.name}\t{image.shape[2]}x{image.shape[1]}\t{elapsed * 1000:.1f} ms")

    macs = count_macs(net, args.macs_size, args.macs_size)
    print(
        f"{len(inputs)} images -> {args.output}; params {format_count(count_params(net))}, "
        f"MACs@{args.macs_size}x{args.macs_size} {format_count(macs)}"
    )
    return 0
