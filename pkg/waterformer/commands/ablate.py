"""``waterformer ablate``: train each variant under one protocol and tabulate."""

import argparse
from pathlib import Path

from .. import storage
from ..models import AblationReport
from ..variants import VARIANTS, run_variant, variant_spec
from .common import format_table, resolve_train_config, split_list

TABLE_HEADER = ["variant", "crb", "cfb", "l_chroma", "l_sobel", "change", "ssim", "psnr"]
CSV_HEADER = [*TABLE_HEADER, "initial_loss", "final_loss"]


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("ablate", help="train and score several variants with a shared protocol")
    parser.add_argument(
        "--variants",
        type=split_list,
        default=list(VARIANTS),
        help=f"comma-separated variants (default: {','.join(VARIANTS)})",
    )
    parser.add_argument("--data", type=Path, required=True, help="manifest with train and test (or val) pairs")
    parser.add_argument("--out", type=Path, required=True, help="directory for per-variant checkpoints and curves")
    parser.add_argument("--output", type=Path, help="write the ablation table as CSV here")
    parser.add_argument("--config", type=Path, help="YAML training config shared by every variant")
    parser.add_argument("--epochs", type=int, help="epochs per variant")
    parser.add_argument("--image-size", type=int, help="training and evaluation resolution")
    parser.add_argument("--seed", type=int, help="seed shared by every variant")
    parser.add_argument("--name", help="ablation record name (default: the output directory name)")
    parser.set_defaults(handler=run)


def _mark(flag: bool) -> str:
    return "✓" if flag else "w/o"


def run(args: argparse.Namespace) -> int:
    for name in args.variants:
        variant_spec(name)
    base = resolve_train_config(args)
    manifest = storage.read_manifest(args.data)

    report = AblationReport(seed=base.seed)
    for name in args.variants:
        summary, _, metrics = run_variant(name, manifest, base, args.out)
        storage.save_record("reports", f"{args.name or args.out.name}-{name}", metrics)
        report.rows.append(summary)

    table = [
        [r.variant, _mark(r.crb), _mark(r.cfb), _mark(r.l_chroma), _mark(r.l_sobel), r.change, f"{r.ssim:.4f}", f"{r.psnr:.3f}"]
        for r in report.rows
    ]
    print(format_table(TABLE_HEADER, table))
    for r in report.rows:
        trend = "down" if r.final_loss < r.initial_loss else "not down"
        print(f"{r.variant}: loss {r.initial_loss:.5f} -> {r.final_loss:.5f} ({trend})")

    if args.output is not None:
        storage.write_table(
            args.output,
            CSV_HEADER,
            ([*row, repr(r.initial_loss), repr(r.final_loss)] for row, r in zip(table, report.rows)),
        )
    storage.save_record("ablations", args.name or args.out.name, report)
    return 0
