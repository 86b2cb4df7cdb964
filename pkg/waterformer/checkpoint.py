"""WFK1 checkpoint archives.

Layout: a fixed header (magic ``WFK1``, format version, payload length,
SHA-256 of the payload) followed by a ``torch.save`` payload holding the
config echo, model and optimiser state, counters, RNG state and loss history.
"""

import hashlib
import io
import logging
import struct
from pathlib import Path

import torch
from pydantic import ValidationError

from .errors import IncompatibleCheckpointError, IngestionError, IntegrityError
from .models import LossRecord, TrainConfig
from .net.waterformer import WaterFormer
from .state import TrainState, build_optimizer

logger = logging.getLogger(__name__)

MAGIC = b"WFK1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHQ32s")


def _encode(payload: dict) -> bytes:
    buffer = io.BytesIO()
    torch.save(payload, buffer)
    body = buffer.getvalue()
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(body), hashlib.sha256(body).digest()) + body


def _decode(path: Path) -> dict:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IngestionError(f"Cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise IntegrityError(f"Checkpoint {path} is truncated ({len(raw)} bytes)")
    magic, version, length, digest = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise IntegrityError(f"{path} is not a WFK1 checkpoint (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpointError(
            f"Checkpoint {path} has format version {version}; this build reads version {FORMAT_VERSION}"
        )
    body = raw[_HEADER.size :]
    if len(body) != length:
        raise IntegrityError(f"Checkpoint {path} is truncated: expected {length} payload bytes, found {len(body)}")
    if hashlib.sha256(body).digest() != digest:
        raise IntegrityError(f"Checkpoint {path} failed its SHA-256 check")
    try:
        return torch.load(io.BytesIO(body), map_location="cpu", weights_only=True)
    except Exception as exc:
        raise IntegrityError(f"Checkpoint {path} payload does not decode: {exc}") from exc


def save_checkpoint(state: TrainState, path: Path) -> Path:
    """Write ``state`` atomically (temp file, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "config": state.config.model_dump_json(),
        "model": state.model.state_dict(),
        "optimizer": state.optimizer.state_dict(),
        "epoch": state.epoch,
        "global_step": state.global_step,
        "seed": state.config.seed,
        "rng": torch.get_rng_state(),
        "history": [r.model_dump() for r in state.history],
        "best_epoch": state.best_epoch,
        "best_val_psnr": state.best_val_psnr,
    }
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(_encode(payload))
    tmp.replace(path)
    logger.debug("saved checkpoint %s (epoch %d, step %d)", path, state.epoch, state.global_step)
    return path


def load_checkpoint(path: Path, restore_rng: bool = True) -> TrainState:
    """Rebuild the training state saved by ``save_checkpoint``.

    Raises:
        IngestionError: The file cannot be read.
        IntegrityError: Bad magic, truncation, digest mismatch or bad payload.
        IncompatibleCheckpointError: Other format version, or weights that do
            not fit the echoed config.
    """
    path = Path(path)
    payload = _decode(path)
    try:
        config = TrainConfig.model_validate_json(payload["config"])
    except (KeyError, ValidationError) as exc:
        raise IncompatibleCheckpointError(f"Checkpoint {path} carries an unreadable config: {exc}") from exc

    model = WaterFormer(config.model)
    try:
        model.load_state_dict(payload["model"])
    except RuntimeError as exc:
        raise IncompatibleCheckpointError(f"Checkpoint {path} weights do not match its config: {exc}") from exc
    optimizer = build_optimizer(model, config)
    optimizer.load_state_dict(payload["optimizer"])
    if restore_rng:
        torch.set_rng_state(payload["rng"])

    return TrainState(
        model=model,
        optimizer=optimizer,
        config=config,
        epoch=int(payload["epoch"]),
        global_step=int(payload["global_step"]),
        history=[LossRecord.model_validate(r) for r in payload["history"]],
        best_epoch=payload["best_epoch"],
        best_val_psnr=payload["best_val_psnr"],
    )
