"""Underwater image formation and its inversion.

Forward model per channel and pixel::

    U = I·T + A·(1 − T)

Inverting it with K = 1/T − 1 and B = A·K gives the soft reconstruction
``I = U·K − B + U`` that the network's last layer evaluates on a predicted
six-channel map ``O = [K_R, K_G, K_B, B_R, B_G, B_B]``.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import torch
import yaml

from .color_space import Clamped, clamp_unit
from .errors import ConfigurationError, DimensionError, DomainError
from .models import WaterType

logger = logging.getLogger(__name__)

WATER_TYPE_IDS: tuple[str, ...] = ("I", "IA", "IB", "II", "III", "1", "3", "5", "7", "9")
DEFAULT_T_MIN = 0.05


# ── Domain types ──────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class DegradationParams:
    """Veiling light ``A`` (3,) and transmission ``T`` (3×H×W or 3×1×1)."""

    background_light: torch.Tensor
    transmission: torch.Tensor

    def __post_init__(self) -> None:
        if self.background_light.shape != (3,):
            raise DimensionError(f"background light must have shape (3,), got {tuple(self.background_light.shape)}")
        if self.transmission.dim() < 3 or self.transmission.shape[-3] != 3:
            raise DimensionError(f"transmission must be 3×H×W, got {tuple(self.transmission.shape)}")
        if bool((self.transmission <= 0).any()) or bool((self.transmission > 1).any()):
            raise DomainError("transmission must lie in (0, 1]")
        if bool((self.background_light < 0).any()) or bool((self.background_light > 1).any()):
            raise DomainError("background light must lie in [0, 1]")

    @property
    def light_map(self) -> torch.Tensor:
        return self.background_light.view(3, 1, 1)


@dataclass(frozen=True)
class ReconVars:
    """Per-pixel ``K`` and ``B`` planes, each ``(..., 3, H, W)``."""

    k: torch.Tensor
    b: torch.Tensor

    @classmethod
    def from_degradation(cls, params: DegradationParams) -> "ReconVars":
        k = 1.0 / params.transmission - 1.0
        return cls(k=k, b=params.light_map * k)

    @classmethod
    def split(cls, o: torch.Tensor) -> "ReconVars":
        if o.shape[-3] != 6:
            raise DimensionError(f"reconstruction map needs 6 channels, got {o.shape[-3]}")
        return cls(k=o[..., :3, :, :], b=o[..., 3:, :, :])

    def stack(self) -> torch.Tensor:
        k, b = torch.broadcast_tensors(self.k, self.b)
        return torch.cat((k, b), dim=-3)


# ── Water types ───────────────────────────────────────────────────────────────


@lru_cache(maxsize=1)
def load_water_types() -> dict[str, WaterType]:
    """Read the built-in table and check its qualitative structure."""
    raw = yaml.safe_load(resources.files("waterformer").joinpath("water_types.yaml").read_text())
    table = {str(name): WaterType(name=str(name), **fields) for name, fields in raw.items()}
    missing = set(WATER_TYPE_IDS) - set(table)
    if missing:
        raise ConfigurationError(f"water type table lacks {sorted(missing)}")
    for wt in table.values():
        if wt.kind == "open_sea" and not wt.beta[0] > max(wt.beta[1:]):
            raise ConfigurationError(f"open-sea type {wt.name} must attenuate red fastest")
    logger.debug("loaded %d water types", len(table))
    return table


def make_water_type(
    type_id: str | int,
    depth: float | torch.Tensor,
    size: tuple[int, int] | None = None,
) -> DegradationParams:
    """Degradation parameters of a named water type at the given depth.

    Args:
        type_id: One of ``WATER_TYPE_IDS``.
        depth: Path length in metres, either a constant or an ``H×W`` map.
        size: Spatial size to expand a constant depth to; ``None`` keeps a
            broadcastable ``3×1×1`` transmission.

    Raises:
        ConfigurationError: Unknown water type.
    """
    table = load_water_types()
    key = str(type_id)
    if key not in table:
        raise ConfigurationError(f"Unknown water type '{type_id}'. Known types: {', '.join(WATER_TYPE_IDS)}")
    wt = table[key]

    depth_map = torch.as_tensor(depth, dtype=torch.float64)
    if depth_map.dim() == 0:
        depth_map = depth_map.view(1, 1)
        if size is not None:
            depth_map = depth_map.expand(*size)
    if bool((depth_map < 0).any()):
        raise DomainError("depth must be >= 0")

    beta = torch.tensor(wt.beta, dtype=torch.float64).view(3, 1, 1)
    transmission = torch.exp(-beta * depth_map.unsqueeze(0))
    light = torch.tensor(wt.background_light, dtype=torch.float64)
    return DegradationParams(background_light=light, transmission=transmission)


# ── Forward model and inversions ──────────────────────────────────────────────


def _check_broadcast(image: torch.Tensor, params: DegradationParams) -> None:
    if image.dim() < 3 or image.shape[-3] != 3:
        raise DimensionError(f"expected a (..., 3, H, W) image, got {tuple(image.shape)}")
    try:
        torch.broadcast_shapes(image.shape, params.transmission.shape)
    except RuntimeError as exc:
        raise DimensionError(
            f"image {tuple(image.shape)} and transmission {tuple(params.transmission.shape)} do not agree"
        ) from exc


def degrade(clean: torch.Tensor, params: DegradationParams) -> Clamped:
    """Apply the formation model; the clamp report holds the raw range."""
    _check_broadcast(clean, params)
    t = params.transmission.to(clean.dtype)
    a = params.light_map.to(clean.dtype)
    return clamp_unit(clean * t + a * (1.0 - t))


def recover_analytic(
    degraded: torch.Tensor, params: DegradationParams, t_min: float = DEFAULT_T_MIN
) -> torch.Tensor:
    """Invert the formation model given the true parameters.

    Raises:
        DomainError: Some transmission value lies below ``t_min``.
    """
    _check_broadcast(degraded, params)
    lowest = float(params.transmission.min())
    if lowest < t_min:
        raise DomainError(f"transmission minimum {lowest:.6g} is below t_min={t_min}")
    inv_t = 1.0 / params.transmission.to(degraded.dtype)
    a = params.light_map.to(degraded.dtype)
    return degraded * (inv_t - 1.0) + a * (1.0 - inv_t) + degraded


def soft_reconstruct(input: torch.Tensor, o: torch.Tensor) -> torch.Tensor:
    """``input·K − B + input`` with ``K, B`` the two halves of ``o``.

    No clamping: callers decide whether to clamp the result.
    """
    recon = ReconVars.split(o)
    return input * recon.k - recon.b + input
