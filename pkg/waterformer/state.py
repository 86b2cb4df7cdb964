"""Mutable training state: model, optimiser, counters and loss history."""

import logging
from dataclasses import dataclass, field

import torch

from .models import LossRecord, TrainConfig
from .net.waterformer import WaterFormer

logger = logging.getLogger(__name__)


@dataclass
class TrainState:
    model: WaterFormer
    optimizer: torch.optim.Adam
    config: TrainConfig
    epoch: int = 0
    global_step: int = 0
    history: list[LossRecord] = field(default_factory=list)
    best_epoch: int | None = None
    best_val_psnr: float | None = None


def build_optimizer(model: torch.nn.Module, config: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        model.parameters(),
        lr=config.lr0,
        betas=(config.beta1, config.beta2),
        eps=config.eps,
    )


def create_state(config: TrainConfig) -> TrainState:
    """Fresh model and optimiser; parameter init draws from the seeded torch RNG."""
    torch.manual_seed(config.seed)
    model = WaterFormer(config.model)
    optimizer = build_optimizer(model, config)
    logger.info(
        "Adam lr0=%g betas=(%g, %g) eps=%g; lr x%g every %d epochs",
        config.lr0,
        config.beta1,
        config.beta2,
        config.eps,
        config.decay_factor,
        config.decay_every,
    )
    return TrainState(model=model, optimizer=optimizer, config=config)
