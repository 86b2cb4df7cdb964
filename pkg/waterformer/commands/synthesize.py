"""``waterformer synthesize``: build a paired corpus from clean images."""

import argparse
from pathlib import Path

from ..data import MANIFEST_NAME, build_synthetic_corpus
from ..physics import WATER_TYPE_IDS
from .common import split_list


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("synthesize", help="degrade clean images into a paired training corpus")
    parser.add_argument("--clean-dir", type=Path, required=True, help="directory of clean PNG/JPEG scenes")
    parser.add_argument("--out-dir", type=Path, required=True, help="where pairs, parameter files and the manifest go")
    parser.add_argument(
        "--types",
        type=split_list,
        default=list(WATER_TYPE_IDS),
        help=f"comma-separated water types (default: all of {','.join(WATER_TYPE_IDS)})",
    )
    parser.add_argument("--depth-min", type=float, default=1.0, help="smallest water path length in metres")
    parser.add_argument("--depth-max", type=float, default=5.0, help="largest water path length in metres")
    parser.add_argument("--count", type=int, help="number of clean scenes to use (default: all, cycling if larger)")
    parser.add_argument("--size", type=int, default=64, help="side length the clean scenes are resized to")
    parser.add_argument("--seed", type=int, default=0, help="seed for splits and depth draws")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    manifest = build_synthetic_corpus(
        args.clean_dir,
        args.out_dir,
        args.types,
        depth_range=(args.depth_min, args.depth_max),
        count=args.count,
        seed=args.seed,
        size=args.size,
    )
    print(f"{len(manifest.entries)} pairs written; manifest: {args.out_dir / MANIFEST_NAME}")
    return 0
