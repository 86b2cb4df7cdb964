"""``waterformer evaluate``: score enhanced images, with or without references."""

import argparse
import logging
from pathlib import Path

from tqdm import tqdm

from .. import image_io, storage
from ..errors import DataError, IngestionError
from ..metrics import report_rows, score_image
from ..models import METRIC_COLUMNS, MetricReport
from .common import format_table

logger = logging.getLogger(__name__)

CSV_HEADER = ["id", *METRIC_COLUMNS]


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("evaluate", help="compute SSIM/PSNR/NRMSE/UCIQE/UIQM over a directory")
    parser.add_argument("--pred", type=Path, required=True, help="directory of enhanced images")
    refs = parser.add_mutually_exclusive_group(required=True)
    refs.add_argument("--ref", type=Path, help="directory of references, matched to --pred by file stem")
    refs.add_argument("--no-ref", action="store_true", help="only compute the no-reference metrics")
    parser.add_argument("--output", type=Path, help="write the per-image table as CSV here")
    parser.add_argument("--per-channel-ssim", action="store_true", help="average SSIM over RGB instead of luma")
    parser.add_argument(
        "--nrmse", choices=["euclidean", "min-max"], default="euclidean", help="NRMSE normalisation"
    )
    parser.add_argument("--name", help="report record name (default: the --pred directory name)")
    parser.set_defaults(handler=run)


def _pair_by_stem(pred: list[Path], ref: list[Path]) -> list[tuple[Path, Path]]:
    """Match predictions to references by file stem; every file needs a partner."""
    by_stem = {p.stem: p for p in ref}
    pred_stems = {p.stem for p in pred}
    problems = []
    if unmatched := sorted(p.name for p in pred if p.stem not in by_stem):
        problems.append(f"{len(unmatched)} predictions have no reference: {', '.join(unmatched)}")
    if missing := sorted(p.name for p in ref if p.stem not in pred_stems):
        problems.append(f"{len(missing)} references have no prediction: {', '.join(missing)}")
    if problems:
        raise DataError("; ".join(problems))
    return [(p, by_stem[p.stem]) for p in pred]


def run(args: argparse.Namespace) -> int:
    predictions = image_io.list_images(args.pred)
    if not predictions:
        raise IngestionError(f"No PNG or JPEG images in {args.pred}")

    pairs: list[tuple[Path, Path | None]]
    if args.no_ref:
        pairs = [(p, None) for p in predictions]
    else:
        pairs = list(_pair_by_stem(predictions, image_io.list_images(args.ref)))

    rows = []
    for pred_path, ref_path in tqdm(pairs, desc="scoring", unit="img", disable=None):
        pred = image_io.read_image(pred_path)
        ref = image_io.read_image(ref_path) if ref_path is not None else None
        rows.append(score_image(pred_path.stem, pred, ref, args.per_channel_ssim, args.nrmse))
    report = MetricReport.from_rows(rows)

    table = report_rows(report)
    print(format_table(CSV_HEADER, table))
    means = ", ".join(f"{k} {v:.4f}" for k, v in report.aggregate.items())
    print(f"\nmean over {report.counts['images']} images: {means}")

    if args.output is not None:
        storage.write_table(args.output, CSV_HEADER, table)
        logger.info("wrote %s", args.output)
    storage.save_record("reports", args.name or args.pred.name, report)
    return 0
