"""Building blocks of the WaterFormer network.

The window-attention block, RLN and SK fusion follow the DehazeFormer layout;
the colour restoration block is a transposed (channel) attention in the
Restormer family.
"""

import math
from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange
from torch.nn.init import _calculate_fan_in_and_fan_out, trunc_normal_

from ..errors import ConfigurationError, DimensionError
from ..models import FusionKind

META_HIDDEN = 256


def _init_scaled(conv: nn.Conv2d, network_depth: int) -> None:
    """Truncated-normal init scaled down with network depth."""
    gain = (8 * network_depth) ** (-1 / 4)
    fan_in, fan_out = _calculate_fan_in_and_fan_out(conv.weight)
    trunc_normal_(conv.weight, std=gain * math.sqrt(2.0 / float(fan_in + fan_out)))
    if conv.bias is not None:
        nn.init.zeros_(conv.bias)


def _pad(x: torch.Tensor, left: int, right: int, top: int, bottom: int) -> torch.Tensor:
    """Reflect-pad, or replicate-pad when a pad reaches the map size."""
    if left == right == top == bottom == 0:
        return x
    h, w = x.shape[-2:]
    mode = "reflect" if max(left, right) < w and max(top, bottom) < h else "replicate"
    return F.pad(x, (left, right, top, bottom), mode=mode)


def _check_pair(x1: torch.Tensor, x2: torch.Tensor) -> None:
    if x1.shape != x2.shape:
        raise DimensionError(f"fusion inputs differ in shape: {tuple(x1.shape)} vs {tuple(x2.shape)}")


# ── Normalisation ─────────────────────────────────────────────────────────────


class NormStats(NamedTuple):
    normalized: torch.Tensor
    mean: torch.Tensor
    std: torch.Tensor


class RLN(nn.Module):
    """Rescale layer normalisation.

    Normalises every pixel across channels and keeps the per-pixel mean and
    standard deviation, so the block tail can put them back through the two
    1×1 ``meta`` convolutions.
    """

    def __init__(self, dim: int, eps: float = 1e-5) -> None:
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(1, dim, 1, 1))
        self.bias = nn.Parameter(torch.zeros(1, dim, 1, 1))
        self.meta1 = nn.Conv2d(1, dim, 1)
        self.meta2 = nn.Conv2d(1, dim, 1)
        trunc_normal_(self.meta1.weight, std=0.02)
        nn.init.ones_(self.meta1.bias)
        trunc_normal_(self.meta2.weight, std=0.02)
        nn.init.zeros_(self.meta2.bias)

    def normalize(self, x: torch.Tensor) -> NormStats:
        mean = x.mean(dim=1, keepdim=True)
        std = torch.sqrt((x - mean).pow(2).mean(dim=1, keepdim=True) + self.eps)
        return NormStats((x - mean) / std, mean, std)

    def restore(self, y: torch.Tensor, mean: torch.Tensor, std: torch.Tensor) -> torch.Tensor:
        return y * self.meta1(std) + self.meta2(mean)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Returns the rescaled features plus the restore scale and shift."""
        stats = self.normalize(x)
        return stats.normalized * self.weight + self.bias, self.meta1(stats.std), self.meta2(stats.mean)


# ── MLP ───────────────────────────────────────────────────────────────────────


class FReLU(nn.Module):
    """``max(x, dwconv3x3(x))`` per channel."""

    def __init__(self, dim: int) -> None:
        super().__init__()
        self.funnel = nn.Conv2d(dim, dim, 3, padding=1, groups=dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.max(x, self.funnel(x))


class Mlp(nn.Module):
    def __init__(self, network_depth: int, dim: int, ratio: float = 2.0, activation: str = "frelu") -> None:
        super().__init__()
        if ratio < 1:
            raise ConfigurationError(f"mlp ratio must be >= 1, got {ratio}")
        hidden = int(dim * ratio)
        self.fc1 = nn.Conv2d(dim, hidden, 1)
        self.act = FReLU(hidden) if activation == "frelu" else nn.ReLU()
        self.fc2 = nn.Conv2d(hidden, dim, 1)
        _init_scaled(self.fc1, network_depth)
        _init_scaled(self.fc2, network_depth)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


# ── Spatial window attention ──────────────────────────────────────────────────


def window_partition(x: torch.Tensor, window_size: int) -> torch.Tensor:
    """``B×H×W×C`` → ``(B·nW)×(ws²)×C``."""
    return rearrange(x, "b (nh wh) (nw ww) c -> (b nh nw) (wh ww) c", wh=window_size, ww=window_size)


def window_reverse(windows: torch.Tensor, window_size: int, h: int, w: int) -> torch.Tensor:
    return rearrange(
        windows,
        "(b nh nw) (wh ww) c -> b (nh wh) (nw ww) c",
        nh=h // window_size,
        nw=w // window_size,
        wh=window_size,
    )


def relative_positions(window_size: int) -> torch.Tensor:
    """Log-spaced relative coordinates of every pair of window positions."""
    coords = torch.stack(torch.meshgrid(torch.arange(window_size), torch.arange(window_size), indexing="ij"))
    flat = coords.flatten(1)
    rel = (flat[:, :, None] - flat[:, None, :]).permute(1, 2, 0).contiguous().float()
    return torch.sign(rel) * torch.log1p(rel.abs())


class WindowAttention(nn.Module):
    """Multi-head attention inside each window with a learned position bias."""

    def __init__(self, dim: int, window_size: int, heads: int) -> None:
        super().__init__()
        if dim % heads:
            raise ConfigurationError(f"{heads} heads do not divide {dim} channels")
        self.dim = dim
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.register_buffer("relative_positions", relative_positions(window_size), persistent=False)
        self.meta = nn.Sequential(nn.Linear(2, META_HIDDEN), nn.ReLU(), nn.Linear(META_HIDDEN, heads))

    def attend(self, qkv: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns the attended values ``B_×N×C`` and the maps ``B_×heads×N×N``."""
        q, k, v = rearrange(qkv, "b n (three h d) -> three b h n d", three=3, h=self.heads)
        attn = (q * self.scale) @ k.transpose(-2, -1)
        bias = self.meta(self.relative_positions.to(qkv.dtype)).permute(2, 0, 1)
        attn = torch.softmax(attn + bias.unsqueeze(0), dim=-1)
        return rearrange(attn @ v, "b h n d -> b n (h d)"), attn

    def forward(self, qkv: torch.Tensor) -> torch.Tensor:
        return self.attend(qkv)[0]


class WindowSelfAttention(nn.Module):
    def __init__(self, network_depth: int, dim: int, heads: int, window_size: int, shift_size: int) -> None:
        super().__init__()
        self.window_size = window_size
        self.shift_size = shift_size
        self.qkv = nn.Conv2d(dim, dim * 3, 1)
        self.attn = WindowAttention(dim, window_size, heads)
        self.proj = nn.Conv2d(dim, dim, 1)

        fan_in, fan_out = _calculate_fan_in_and_fan_out(self.qkv.weight)
        trunc_normal_(self.qkv.weight, std=math.sqrt(2.0 / float(fan_in + fan_out)))
        nn.init.zeros_(self.qkv.bias)
        _init_scaled(self.proj, network_depth)

    def _windows(self, x: torch.Tensor) -> tuple[torch.Tensor, int, int]:
        ws, shift = self.window_size, self.shift_size
        h, w = x.shape[-2:]
        pad_h = (ws - h % ws) % ws
        pad_w = (ws - w % ws) % ws
        if shift:
            qkv = _pad(self.qkv(x), shift, (ws - shift + pad_w) % ws, shift, (ws - shift + pad_h) % ws)
        else:
            qkv = _pad(self.qkv(x), 0, pad_w, 0, pad_h)
        ht, wt = qkv.shape[-2:]
        return window_partition(qkv.permute(0, 2, 3, 1), ws), ht, wt

    def attention_maps(self, x: torch.Tensor) -> torch.Tensor:
        windows, _, _ = self._windows(x)
        return self.attn.attend(windows)[1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        windows, ht, wt = self._windows(x)
        out = window_reverse(self.attn(windows), self.window_size, ht, wt)
        out = out[:, self.shift_size : self.shift_size + h, self.shift_size : self.shift_size + w, :]
        return self.proj(out.permute(0, 3, 1, 2))


class WindowBlock(nn.Module):
    """RLN → window attention → restore, then the MLP, each with a residual."""

    def __init__(
        self,
        network_depth: int,
        dim: int,
        heads: int,
        window_size: int = 8,
        shift_size: int = 0,
        mlp_ratio: float = 2.0,
        mlp_activation: str = "frelu",
    ) -> None:
        super().__init__()
        self.norm = RLN(dim)
        self.attn = WindowSelfAttention(network_depth, dim, heads, window_size, shift_size)
        self.mlp = Mlp(network_depth, dim, mlp_ratio, mlp_activation)

    def attention_maps(self, x: torch.Tensor) -> torch.Tensor:
        return self.attn.attention_maps(self.norm(x)[0])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        normed, rescale, rebias = self.norm(x)
        x = x + self.attn(normed) * rescale + rebias
        return x + self.mlp(x)


# ── Colour restoration (channel attention) ────────────────────────────────────


class ChannelAttention(nn.Module):
    """``softmax(Q·Kᵀ / γ)·V`` over channels, one learnable γ per head.

    Inputs are ``B×heads×d×(HW)``; the maps are ``d×d`` whatever the image size.
    """

    def __init__(self, heads: int, head_dim: int, qk_norm: bool = True) -> None:
        super().__init__()
        self.qk_norm = qk_norm
        self.temperature = nn.Parameter(torch.full((heads, 1, 1), math.sqrt(head_dim)))

    def weights(self, q: torch.Tensor, k: torch.Tensor) -> torch.Tensor:
        if self.qk_norm:
            q = F.normalize(q, dim=-1)
            k = F.normalize(k, dim=-1)
        return torch.softmax((q @ k.transpose(-2, -1)) / self.temperature, dim=-1)

    def forward(self, q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
        return self.weights(q, k) @ v


class ColorRestorationBlock(nn.Module):
    """CRB: RLN, pointwise then depthwise QKV projection, channel attention on
    a 3×3-convolved V, affine restore, residual, then the MLP with residual.
    """

    def __init__(
        self,
        network_depth: int,
        dim: int,
        heads: int,
        mlp_ratio: float = 2.0,
        mlp_activation: str = "frelu",
        qk_norm: bool = True,
    ) -> None:
        super().__init__()
        if dim % heads:
            raise ConfigurationError(f"CRB: {heads} heads do not divide {dim} channels")
        self.heads = heads
        self.norm = RLN(dim)
        self.qkv = nn.Conv2d(dim, dim * 3, 1)
        self.qkv_dw = nn.Conv2d(dim * 3, dim * 3, 3, padding=1, groups=dim * 3)
        self.v_conv = nn.Conv2d(dim, dim, 3, padding=1, groups=dim)
        self.attn = ChannelAttention(heads, dim // heads, qk_norm)
        self.mlp = Mlp(network_depth, dim, mlp_ratio, mlp_activation)

    def _project(self, normed: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        q, k, v = self.qkv_dw(self.qkv(normed)).chunk(3, dim=1)
        v = self.v_conv(v)
        return tuple(rearrange(t, "b (head c) h w -> b head c (h w)", head=self.heads) for t in (q, k, v))

    def attention_maps(self, x: torch.Tensor) -> torch.Tensor:
        q, k, _ = self._project(self.norm(x)[0])
        return self.attn.weights(q, k)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        normed, rescale, rebias = self.norm(x)
        out = self.attn(*self._project(normed))
        out = rearrange(out, "b head c (h w) -> b (head c) h w", h=h, w=w)
        x = x + out * rescale + rebias
        return x + self.mlp(x)


# ── Skip fusion ───────────────────────────────────────────────────────────────


class ChannelFusionBlock(nn.Module):
    """CFB: per-channel softmax weights over the two branches' GAP descriptors,
    a weighted sum, and a pointwise→depthwise refinement residual.
    """

    def __init__(self, dim: int) -> None:
        super().__init__()
        self.pw = nn.Conv2d(dim, dim, 1)
        self.dw = nn.Conv2d(dim, dim, 3, padding=1, groups=dim)

    @staticmethod
    def weights(x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        """``B×2×C×1×1`` branch weights; they sum to one along dim 1."""
        _check_pair(x1, x2)
        gap = torch.stack((x1.mean(dim=(-2, -1)), x2.mean(dim=(-2, -1))), dim=1)
        return torch.softmax(gap, dim=1)[..., None, None]

    def forward(self, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        alpha = self.weights(x1, x2)
        fused = alpha[:, 0] * x1 + alpha[:, 1] * x2
        return fused + self.dw(self.pw(fused))


class SKFusion(nn.Module):
    """Selective-kernel fusion: GAP of the sum, bottleneck MLP, branch softmax."""

    def __init__(self, dim: int, reduction: int = 8) -> None:
        super().__init__()
        hidden = max(dim // reduction, 4)
        self.mlp = nn.Sequential(
            nn.Conv2d(dim, hidden, 1, bias=False),
            nn.ReLU(),
            nn.Conv2d(hidden, dim * 2, 1, bias=False),
        )

    def forward(self, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        _check_pair(x1, x2)
        feats = torch.stack((x1, x2), dim=1)
        attn = self.mlp(feats.sum(dim=1).mean(dim=(-2, -1), keepdim=True))
        attn = torch.softmax(rearrange(attn, "b (two c) h w -> b two c h w", two=2), dim=1)
        return (feats * attn).sum(dim=1)


class ConcatFusion(nn.Module):
    def __init__(self, dim: int) -> None:
        super().__init__()
        self.proj = nn.Conv2d(dim * 2, dim, 1)

    def forward(self, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        _check_pair(x1, x2)
        return self.proj(torch.cat((x1, x2), dim=1))


class AddFusion(nn.Module):
    def forward(self, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        _check_pair(x1, x2)
        return x1 + x2


def make_fusion(kind: FusionKind, dim: int) -> nn.Module:
    match kind:
        case "cfb":
            return ChannelFusionBlock(dim)
        case "sk":
            return SKFusion(dim)
        case "concat":
            return ConcatFusion(dim)
        case "add":
            return AddFusion()
    raise ConfigurationError(f"Unknown fusion kind '{kind}'")


# ── Resampling ────────────────────────────────────────────────────────────────


class Downsample(nn.Module):
    """Stride-2 2×2 convolution: halves H and W, maps ``in_dim`` → ``out_dim``."""

    def __init__(self, in_dim: int, out_dim: int) -> None:
        super().__init__()
        self.proj = nn.Conv2d(in_dim, out_dim, kernel_size=2, stride=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2] % 2 or x.shape[-1] % 2:
            raise DimensionError(f"downsample needs even spatial dims, got {tuple(x.shape[-2:])}")
        return self.proj(x)


class Upsample(nn.Module):
    """1×1 expansion to ``4·out_dim`` channels, then a 2× pixel shuffle."""

    def __init__(self, in_dim: int, out_dim: int) -> None:
        super().__init__()
        if in_dim % 4:
            raise ConfigurationError(f"upsample input channels must be divisible by 4, got {in_dim}")
        self.proj = nn.Conv2d(in_dim, out_dim * 4, 1)
        self.shuffle = nn.PixelShuffle(2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.shuffle(self.proj(x))
