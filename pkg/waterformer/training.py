"""Optimisation loop: learning-rate schedule, train step, validation and ``fit``."""

import logging
import math
import random
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch.utils.data import DataLoader
from tqdm import trange

from . import storage
from .checkpoint import load_checkpoint, save_checkpoint
from .data import PairedDataset, PairedSample
from .errors import ConfigurationError, DivergenceError, IngestionError
from .losses import l1_loss, total_loss
from .metrics import psnr
from .models import DatasetManifest, LossRecord, TrainConfig, TrainSummary
from .state import TrainState, create_state

logger = logging.getLogger(__name__)

LOSS_CURVE_HEADER = ("step", "total", "l1", "chroma", "sobel", "lr")
Batch = Sequence[PairedSample] | Sequence[torch.Tensor]


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Step schedule: ``lr0 · decay_factor ** (epoch // decay_every)``."""
    return cfg.lr0 * cfg.decay_factor ** (epoch // cfg.decay_every)


def set_deterministic(seed: int, single_thread: bool = True) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    if single_thread:
        torch.set_num_threads(1)


def _stack(batch: Batch) -> tuple[torch.Tensor, torch.Tensor]:
    if len(batch) == 2 and isinstance(batch[0], torch.Tensor):
        return batch[0], batch[1]
    if not batch:
        raise IngestionError("empty training batch")
    return (
        torch.stack([s.degraded for s in batch]),
        torch.stack([s.reference for s in batch]),
    )


def _grad_norms(model: torch.nn.Module) -> dict[str, float]:
    norms: dict[str, float] = {}
    for name, child in model.named_children():
        grads = [p.grad for p in child.parameters() if p.grad is not None]
        if grads:
            norms[name] = float(torch.linalg.vector_norm(torch.stack([torch.linalg.vector_norm(g) for g in grads])))
    return norms


# ── Steps ─────────────────────────────────────────────────────────────────────


def train_step(state: TrainState, batch: Batch, lr: float | None = None) -> LossRecord:
    """One Adam step on ``batch``; mutates ``state`` and returns the step's record.

    Raises:
        DivergenceError: Non-finite loss or gradients; the message lists the
            loss parts and per-module gradient norms.
        ConfigurationError: Every loss weight is zero, so nothing is trained.
    """
    cfg = state.config
    degraded, reference = _stack(batch)
    lr = lr_at(state.epoch, cfg) if lr is None else lr
    for group in state.optimizer.param_groups:
        group["lr"] = lr

    state.model.train()
    state.optimizer.zero_grad(set_to_none=True)
    pred = state.model(degraded)
    total, parts = total_loss(reference, pred, cfg.weights, cfg.chroma)
    values = {"total": float(total), "l1": float(parts.l1), "chroma": float(parts.chroma), "sobel": float(parts.sobel)}
    if not all(math.isfinite(v) for v in values.values()):
        raise DivergenceError(f"non-finite loss at step {state.global_step + 1}: {values}")

    total.backward()
    params = [p for p in state.model.parameters() if p.grad is not None]
    if not params:
        raise ConfigurationError(f"no loss term reaches the parameters (weights {cfg.weights.model_dump()})")
    grad_norm = float(torch.linalg.vector_norm(torch.stack([torch.linalg.vector_norm(p.grad) for p in params])))
    if not math.isfinite(grad_norm):
        raise DivergenceError(
            f"non-finite gradients at step {state.global_step + 1}: loss {values}, grad norms {_grad_norms(state.model)}"
        )
    if cfg.grad_clip is not None and grad_norm > cfg.grad_clip:
        torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip)
        logger.info("step %d: clipped gradient norm %.4g to %.4g", state.global_step + 1, grad_norm, cfg.grad_clip)

    state.optimizer.step()
    state.global_step += 1
    record = LossRecord(step=state.global_step, epoch=state.epoch, lr=lr, **values)
    state.history.append(record)
    logger.debug("step %d: %s grad_norm=%.4g", state.global_step, values, grad_norm)
    return record


@torch.no_grad()
def evaluate_split(model: torch.nn.Module, dataset: PairedDataset, batch_size: int = 4) -> tuple[float, float]:
    """Mean ℓ1 and mean PSNR (clamped outputs) over a dataset."""
    model.eval()
    l1_values: list[float] = []
    psnr_values: list[float] = []
    for start in range(0, len(dataset), batch_size):
        samples = [dataset.sample(i) for i in range(start, min(start + batch_size, len(dataset)))]
        degraded, reference = _stack(samples)
        pred = model(degraded).clamp(0.0, 1.0)
        for p, r in zip(pred, reference):
            l1_values.append(float(l1_loss(r, p)))
            psnr_values.append(psnr(r, p))
    if not l1_values:
        return math.nan, math.nan
    return sum(l1_values) / len(l1_values), sum(psnr_values) / len(psnr_values)


# ── Loop ──────────────────────────────────────────────────────────────────────


def write_loss_curve(history: Sequence[LossRecord], path: Path) -> None:
    storage.write_table(path, LOSS_CURVE_HEADER, ([r.step, r.total, r.l1, r.chroma, r.sobel, r.lr] for r in history))


def fit(
    config: TrainConfig,
    manifest: DatasetManifest,
    out_dir: Path,
    resume: Path | None = None,
) -> tuple[TrainState, TrainSummary]:
    """Train on the manifest's train split, validating every epoch.

    Writes ``last.wfk`` each epoch, ``best.wfk`` whenever validation PSNR
    improves (every epoch when there is no validation split) and
    ``loss_curve.csv`` at the end.
    """
    out_dir = Path(out_dir)
    set_deterministic(config.seed, config.single_thread)
    state = load_checkpoint(resume) if resume is not None else create_state(config)
    if resume is not None:
        # The checkpoint keeps its protocol; only the epoch budget can be extended.
        state.config = state.config.model_copy(update={"epochs": config.epochs})
        logger.info("resuming from %s at epoch %d, step %d", resume, state.epoch, state.global_step)
    cfg = state.config

    train = PairedDataset(
        manifest.split("train"), manifest.root, cfg.image_size, cfg.interpolation, cfg.augment, cfg.seed
    )
    if not len(train):
        raise IngestionError(f"manifest under {manifest.root} has no training pairs")
    val = PairedDataset(manifest.split("val"), manifest.root, cfg.image_size, cfg.interpolation)
    if not len(val):
        logger.warning("no validation pairs; best.wfk tracks the latest epoch")
    loader = DataLoader(train, batch_size=cfg.batch_size, sampler=train.sampler, num_workers=cfg.num_workers)

    for epoch in trange(state.epoch, cfg.epochs, desc="train", unit="epoch", disable=None):
        state.epoch = epoch
        train.set_epoch(epoch)
        records = [train_step(state, batch) for batch in loader]
        val_l1, val_psnr = evaluate_split(state.model, val, cfg.batch_size)
        state.epoch = epoch + 1

        mean_total = sum(r.total for r in records) / len(records)
        logger.info(
            "epoch %d/%d lr=%g train=%.5f (l1 %.5f, chroma %.5f, sobel %.5f) val_l1=%.5f val_psnr=%.3f",
            epoch + 1,
            cfg.epochs,
            records[-1].lr,
            mean_total,
            sum(r.l1 for r in records) / len(records),
            sum(r.chroma for r in records) / len(records),
            sum(r.sobel for r in records) / len(records),
            val_l1,
            val_psnr,
        )
        improved = not len(val) or state.best_val_psnr is None or val_psnr > state.best_val_psnr
        if improved:
            state.best_epoch = epoch + 1
            state.best_val_psnr = None if math.isnan(val_psnr) else val_psnr
            save_checkpoint(state, out_dir / "best.wfk")
            logger.info("new best checkpoint at epoch %d", epoch + 1)
        save_checkpoint(state, out_dir / "last.wfk")

    write_loss_curve(state.history, out_dir / "loss_curve.csv")
    summary = TrainSummary(
        variant=cfg.variant,
        epochs_run=state.epoch,
        global_step=state.global_step,
        best_epoch=state.best_epoch,
        best_val_psnr=state.best_val_psnr,
        final_train_loss=state.history[-1].total if state.history else None,
    )
    return state, summary
