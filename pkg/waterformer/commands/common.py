"""Helpers shared by the command handlers: config merging and table output."""

import argparse
from pathlib import Path
from typing import Any, Sequence

from pydantic import ValidationError

from ..errors import ConfigurationError
from ..models import TrainConfig
from ..storage import load_config
from ..variants import VARIANTS, variant_config


def split_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def add_train_flags(parser: argparse.ArgumentParser) -> None:
    """Flags that override fields of the training config file."""
    parser.add_argument("--config", type=Path, help="YAML training config; explicit flags override its values")
    parser.add_argument("--full-preset", action="store_true", help="start from the full protocol (300 epochs, 256×256, batch 4)")
    parser.add_argument("--variant", choices=list(VARIANTS), help="apply an ablation variant's switches and loss weights")
    parser.add_argument("--epochs", type=int, help="number of training epochs")
    parser.add_argument("--batch-size", type=int, help="pairs per optimisation step")
    parser.add_argument("--lr", type=float, help="initial learning rate")
    parser.add_argument("--decay-every", type=int, help="epochs between learning-rate halvings")
    parser.add_argument("--decay-factor", type=float, help="multiplicative learning-rate decay")
    parser.add_argument("--grad-clip", type=float, help="clip the global gradient norm to this value")
    parser.add_argument("--image-size", type=int, help="training resolution (square)")
    parser.add_argument(
        "--interpolation", choices=["bilinear", "bicubic", "nearest"], help="resampling filter for resizing"
    )
    parser.add_argument("--no-augment", action="store_true", help="disable random flips and rotations")
    parser.add_argument("--num-workers", type=int, help="data loader worker processes")
    parser.add_argument("--seed", type=int, help="seed for every random draw (default 0)")


_FLAG_FIELDS = {
    "epochs": "epochs",
    "batch_size": "batch_size",
    "lr": "lr0",
    "decay_every": "decay_every",
    "decay_factor": "decay_factor",
    "grad_clip": "grad_clip",
    "image_size": "image_size",
    "interpolation": "interpolation",
    "num_workers": "num_workers",
    "seed": "seed",
}


def resolve_train_config(args: argparse.Namespace) -> TrainConfig:
    """Defaults < ``--full-preset`` < ``--config`` file < explicit flags."""
    base = TrainConfig.full_preset() if getattr(args, "full_preset", False) else TrainConfig()
    data: dict[str, Any] = base.model_dump()
    if getattr(args, "config", None) is not None:
        data.update(load_config(args.config, TrainConfig).model_dump(exclude_unset=True))
    for flag, field in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[field] = value
    if getattr(args, "no_augment", False):
        data["augment"] = False
    try:
        config = TrainConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"Invalid training settings:\n{exc}") from exc
    if getattr(args, "variant", None):
        config = variant_config(args.variant, config)
    return config


def format_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Left-aligned, space-padded plain-text table."""
    cells = [[str(h) for h in header]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def format_count(value: int) -> str:
    """``5_210_000_000`` → ``5.210G``."""
    for unit, scale in (("G", 1e9), ("M", 1e6), ("K", 1e3)):
        if value >= scale:
            return f"{value / scale:.3f}{unit}"
    return str(value)
