"""The three-stage U-shaped WaterFormer and its footprint counters."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import DivergenceError
from ..models import ALL_STAGES, ModelConfig, ReconKind, StageName
from ..physics import soft_reconstruct
from .blocks import (
    ChannelAttention,
    ColorRestorationBlock,
    Downsample,
    Upsample,
    WindowAttention,
    WindowBlock,
    make_fusion,
)

HEAD_CHANNELS: dict[ReconKind, int] = {"uw_soft": 6, "soft": 4, "global_residual": 3}
SIZE_MULTIPLE = 4


def reconstruct(kind: ReconKind, input: torch.Tensor, o: torch.Tensor) -> torch.Tensor:
    """Turn the head output into an image.

    ``uw_soft``: per-channel K and B. ``soft``: one shared K plus per-channel
    B. ``global_residual``: ``input + o``.
    """
    match kind:
        case "uw_soft":
            return soft_reconstruct(input, o)
        case "soft":
            k, b = o[:, :1], o[:, 1:]
            return input * k - b + input
        case "global_residual":
            return input + o


class Stage(nn.Module):
    """``depth`` blocks at one resolution; with a CRB, it is the last block."""

    def __init__(self, cfg: ModelConfig, network_depth: int, dim: int, heads: int, depth: int, crb: bool) -> None:
        super().__init__()
        n_window = depth - 1 if crb else depth
        blocks: list[nn.Module] = [
            WindowBlock(
                network_depth,
                dim,
                heads,
                window_size=cfg.window_size,
                shift_size=0 if i % 2 == 0 else cfg.window_size // 2,
                mlp_ratio=cfg.mlp_ratio,
                mlp_activation=cfg.mlp_activation,
            )
            for i in range(n_window)
        ]
        if crb:
            blocks.append(
                ColorRestorationBlock(
                    network_depth, dim, heads, cfg.mlp_ratio, cfg.mlp_activation, cfg.qk_norm
                )
            )
        self.blocks = nn.Sequential(*blocks)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.blocks(x)


class WaterFormer(nn.Module):
    """Encoder (3 stages) → decoder (2 stages) with fused skips → 3×3 head →
    reconstruction from the input image.

    The head is zero-initialised, so a fresh network is the identity map.
    """

    def __init__(self, config: ModelConfig | None = None) -> None:
        super().__init__()
        cfg = config or ModelConfig()
        self.config = cfg
        w1, w2, w3 = cfg.stage_widths
        h1, h2, h3 = cfg.heads
        network_depth = sum(cfg.stage_depths) + sum(cfg.decoder_depths)

        def stage(name: StageName, dim: int, heads: int, depth: int) -> Stage:
            return Stage(cfg, network_depth, dim, heads, depth, cfg.has_crb(name))

        self.embed = nn.Conv2d(3, w1, 3, padding=1, padding_mode="reflect")
        self.encoder1 = stage("encoder1", w1, h1, cfg.stage_depths[0])
        self.down1 = Downsample(w1, w2)
        self.encoder2 = stage("encoder2", w2, h2, cfg.stage_depths[1])
        self.down2 = Downsample(w2, w3)
        self.encoder3 = stage("encoder3", w3, h3, cfg.stage_depths[2])
        self.up2 = Upsample(w3, w2)
        self.fuse2 = make_fusion(cfg.effective_fusion, w2)
        self.decoder2 = stage("decoder2", w2, h2, cfg.decoder_depths[0])
        self.up1 = Upsample(w2, w1)
        self.fuse1 = make_fusion(cfg.effective_fusion, w1)
        self.decoder1 = stage("decoder1", w1, h1, cfg.decoder_depths[1])
        self.head = nn.Conv2d(w1, HEAD_CHANNELS[cfg.recon_kind], 3, padding=1, padding_mode="reflect")
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def _checked(self, name: str, x: torch.Tensor) -> torch.Tensor:
        if self.config.debug and not bool(torch.isfinite(x).all()):
            raise DivergenceError(f"non-finite activations after {name}")
        return x

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        pad_h = (SIZE_MULTIPLE - h % SIZE_MULTIPLE) % SIZE_MULTIPLE
        pad_w = (SIZE_MULTIPLE - w % SIZE_MULTIPLE) % SIZE_MULTIPLE
        if pad_h or pad_w:
            mode = "reflect" if pad_h < h and pad_w < w else "replicate"
            x = F.pad(x, (0, pad_w, 0, pad_h), mode=mode)

        skip1 = self._checked("encoder1", self.encoder1(self.embed(x)))
        skip2 = self._checked("encoder2", self.encoder2(self.down1(skip1)))
        feat = self._checked("encoder3", self.encoder3(self.down2(skip2)))
        feat = self._checked("decoder2", self.decoder2(self.fuse2(self.up2(feat), skip2)))
        feat = self._checked("decoder1", self.decoder1(self.fuse1(self.up1(feat), skip1)))
        o = self._checked("head", self.head(feat))

        out = reconstruct(self.config.recon_kind, x, o)[..., :h, :w]
        return out.clamp(0.0, 1.0) if self.config.clamp_output else out

    def stages(self) -> dict[StageName, Stage]:
        return {name: getattr(self, name) for name in ALL_STAGES}


@torch.no_grad()
def enhance_image(net: WaterFormer, image: torch.Tensor) -> torch.Tensor:
    """Enhance one ``3×H×W`` image; the result is clamped to [0, 1]."""
    net.eval()
    return net(image.unsqueeze(0)).squeeze(0).clamp(0.0, 1.0)


# ── Footprint ─────────────────────────────────────────────────────────────────


def count_params(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())


def count_macs(net: nn.Module, h: int, w: int, in_channels: int = 3) -> int:
    """Multiply-accumulates of one forward pass on a ``1×in_channels×h×w`` input.

    Counts convolutions and linear layers (bias excluded) and the two matrix
    products of every attention; normalisation and activations are free.
    """
    total = 0

    def conv_hook(module: nn.Conv2d, _inputs: tuple, output: torch.Tensor) -> None:
        nonlocal total
        kh, kw = module.kernel_size
        total += output.numel() * (module.in_channels // module.groups) * kh * kw

    def linear_hook(module: nn.Linear, _inputs: tuple, output: torch.Tensor) -> None:
        nonlocal total
        total += output.numel() * module.in_features

    def window_hook(module: WindowAttention, inputs: tuple, _output: torch.Tensor) -> None:
        nonlocal total
        windows, n, _ = inputs[0].shape
        total += 2 * windows * n * n * module.dim

    def channel_hook(_module: ChannelAttention, inputs: tuple, _output: torch.Tensor) -> None:
        nonlocal total
        b, heads, d, n = inputs[0].shape
        total += 2 * b * heads * d * d * n

    hooks = []
    for module in net.modules():
        if isinstance(module, nn.Conv2d):
            hooks.append(module.register_forward_hook(conv_hook))
        elif isinstance(module, nn.Linear):
            hooks.append(module.register_forward_hook(linear_hook))
        elif isinstance(module, WindowAttention):
            hooks.append(module.register_forward_hook(window_hook))
        elif isinstance(module, ChannelAttention):
            hooks.append(module.register_forward_hook(channel_hook))

    param = next(net.parameters(), None)
    dtype = param.dtype if param is not None else torch.float32
    was_training = net.training
    net.eval()
    try:
        with torch.no_grad():
            net(torch.zeros(1, in_channels, h, w, dtype=dtype))
    finally:
        for hook in hooks:
            hook.remove()
        net.train(was_training)
    return total
