"""``waterformer inspect``: describe a checkpoint, a freshly built variant or saved run records."""

import argparse
from pathlib import Path

from pydantic import BaseModel

from .. import storage
from ..checkpoint import load_checkpoint
from ..errors import IngestionError
from ..models import AblationReport, MetricReport, TrainSummary
from ..net.waterformer import WaterFormer, count_macs, count_params
from ..variants import VARIANTS, variant_config
from .common import format_count, format_table

RECORD_KINDS: dict[str, type[BaseModel]] = {
    "training": TrainSummary,
    "reports": MetricReport,
    "ablations": AblationReport,
}
RECORD_HEADERS: dict[str, list[str]] = {
    "training": ["created_at", "variant", "epochs", "best_val_psnr"],
    "reports": ["created_at", "images", "psnr", "uiqm"],
    "ablations": ["created_at", "variants", "seed", "names"],
}


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("inspect", help="print config, parameter count and MACs, or list run records")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint", type=Path, help="WFK1 checkpoint to describe")
    source.add_argument("--variant", choices=list(VARIANTS), help="describe an untrained variant instead")
    source.add_argument("--runs", choices=list(RECORD_KINDS), help="list the saved records of one kind")
    parser.add_argument("--name", help="with --runs, print this one record in full")
    parser.add_argument("--size", type=int, default=256, help="square resolution the MAC count is reported at")
    parser.set_defaults(handler=run)


def _record_row(record: BaseModel) -> list[object]:
    match record:
        case TrainSummary():
            return [record.created_at, record.variant, record.epochs_run, record.best_val_psnr]
        case MetricReport():
            return [record.created_at, record.counts.get("images", 0), record.aggregate.get("psnr"), record.aggregate.get("uiqm")]
        case AblationReport():
            return [record.created_at, len(record.rows), record.seed, ",".join(r.variant for r in record.rows)]
    raise TypeError(f"no table row for {type(record).__name__}")


def _show_runs(kind: str, name: str | None) -> int:
    model = RECORD_KINDS[kind]
    if name is not None:
        record = storage.load_record(kind, name, model)
        if record is None:
            raise IngestionError(f"No {kind} record named '{name}'")
        print(record.model_dump_json(indent=2))
        return 0
    records = storage.list_records(kind, model)
    if not records:
        print(f"no {kind} records")
        return 0
    print(format_table(RECORD_HEADERS[kind], [_record_row(r) for r in records]))
    return 0


def run(args: argparse.Namespace) -> int:
    if args.runs is not None:
        return _show_runs(args.runs, args.name)
    if args.checkpoint is not None:
        state = load_checkpoint(args.checkpoint, restore_rng=False)
        config, net = state.config, state.model
        print(f"checkpoint: {args.checkpoint} (epoch {state.epoch}, step {state.global_step})")
        if state.best_epoch is not None:
            print(f"best epoch {state.best_epoch}, val PSNR {state.best_val_psnr}")
    else:
        config = variant_config(args.variant)
        net = WaterFormer(config.model)
        print(f"variant: {args.variant} (untrained)")

    print(config.model_dump_json(indent=2))
    print(f"params: {count_params(net)} ({format_count(count_params(net))})")
    print(f"MACs@{args.size}x{args.size}: {format_count(count_macs(net, args.size, args.size))}")
    return 0
