"""RGB↔YIQ conversion and per-channel statistics.

Images are channel-first tensors ``(..., 3, H, W)``. Conversions never clamp
so losses see raw chroma; only ``yiq_to_rgb`` clamps, and reports by how much.
"""

from dataclasses import dataclass
from typing import NamedTuple

import torch

# Rows produce Y, I, Q from R, G, B.
YIQ_MATRIX: tuple[tuple[float, float, float], ...] = (
    (0.299, 0.587, 0.114),
    (0.596, -0.274, -0.322),
    (0.211, -0.523, 0.312),
)

# Exact inverse of YIQ_MATRIX (adjugate / determinant, determinant = -0.253894),
# rounded to 12 decimals. The first column is exactly 1 because the I and Q rows
# sum to zero.
RGB_MATRIX: tuple[tuple[float, float, float], ...] = (
    (1.0, 0.956170685404, 0.621432566347),
    (1.0, -0.272688602330, -0.646813237020),
    (1.0, -1.103744082176, 1.700623094677),
)

I_BOUND = 0.596
Q_BOUND = 0.523


class Clamped(NamedTuple):
    """An image clamped to [0, 1] together with its pre-clamp range."""

    image: torch.Tensor
    raw_min: float
    raw_max: float

    @property
    def excursion(self) -> float:
        """Largest distance by which a raw value left [0, 1] (0 when none did)."""
        return max(0.0, -self.raw_min, self.raw_max - 1.0)


@dataclass(frozen=True)
class ImageYIQ:
    """Luma and the two chroma planes, each ``(..., H, W)``."""

    y: torch.Tensor
    i: torch.Tensor
    q: torch.Tensor

    def stack(self) -> torch.Tensor:
        return torch.stack((self.y, self.i, self.q), dim=-3)


def clamp_unit(x: torch.Tensor) -> Clamped:
    """Clamp to [0, 1], recording the raw extremes."""
    return Clamped(x.clamp(0.0, 1.0), float(x.min()), float(x.max()))


def _mix(x: torch.Tensor, matrix: tuple[tuple[float, float, float], ...]) -> torch.Tensor:
    m = torch.tensor(matrix, dtype=x.dtype, device=x.device)
    return torch.einsum("oc,...chw->...ohw", m, x)


def rgb_to_yiq(img: torch.Tensor) -> ImageYIQ:
    """Per-pixel YIQ transform of a ``(..., 3, H, W)`` RGB image."""
    yiq = _mix(img, YIQ_MATRIX)
    return ImageYIQ(yiq[..., 0, :, :], yiq[..., 1, :, :], yiq[..., 2, :, :])


def yiq_to_rgb(img: ImageYIQ) -> Clamped:
    """Inverse transform, clamped to [0, 1] with the excursion reported."""
    return clamp_unit(_mix(img.stack(), RGB_MATRIX))


def channel_stats(channel: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Population mean and variance over every element of ``channel``."""
    mean = channel.mean()
    variance = ((channel - mean) ** 2).mean()
    return mean, variance
