"""``waterformer train``: fit a model on a manifest."""

import argparse
import logging
from pathlib import Path

from .. import storage
from ..training import fit
from .common import add_train_flags, resolve_train_config

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train", help="train a model on the train split of a manifest")
    parser.add_argument("--data", type=Path, required=True, help="manifest written by 'synthesize' (or by hand)")
    parser.add_argument("--out", type=Path, required=True, help="directory for checkpoints and the loss curve")
    parser.add_argument("--resume", type=Path, help="continue from this checkpoint; its settings win over flags except --epochs")
    parser.add_argument("--name", help="run record name (default: the output directory name)")
    add_train_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = resolve_train_config(args)
    logger.debug("resolved training config: %s", config.model_dump_json())
    manifest = storage.read_manifest(args.data)
    state, summary = fit(config, manifest, args.out, resume=args.resume)
    storage.save_config(Path(args.out) / "config.yaml", state.config)
    record = storage.save_record("training", args.name or args.out.name, summary)
    print(
        f"trained {summary.epochs_run} epochs ({summary.global_step} steps); "
        f"best epoch {summary.best_epoch}, val PSNR {summary.best_val_psnr}"
    )
    print(f"checkpoints in {args.out}; summary {record}")
    return 0
