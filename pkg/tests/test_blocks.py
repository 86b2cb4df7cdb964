"""Tests for the network building blocks."""

import pytest
import torch
import torch.nn as nn

from waterformer.errors import ConfigurationError, DimensionError
from waterformer.net.blocks import (
    RLN,
    ChannelFusionBlock,
    ColorRestorationBlock,
    Downsample,
    FReLU,
    Mlp,
    SKFusion,
    Upsample,
    WindowBlock,
    make_fusion,
    window_partition,
    window_reverse,
)


def _zero(*modules: nn.Module) -> None:
    for module in modules:
        for p in module.parameters():
            nn.init.zeros_(p)


# ── RLN ───────────────────────────────────────────────────────────────────────


def test_rln_normalized_statistics() -> None:
    x = torch.randn(2, 16, 8, 8, dtype=torch.float64) * 3 + 1.5
    stats = RLN(16).normalize(x)
    assert float(stats.normalized.mean(dim=1).abs().max()) <= 1e-5
    variance = stats.normalized.pow(2).mean(dim=1)
    assert float((variance - 1).abs().max()) <= 1e-4


def test_rln_restore_recovers_statistics() -> None:
    rln = RLN(8).double()
    _zero(rln.meta1, rln.meta2)
    with torch.no_grad():
        rln.meta1.weight.fill_(1.0)
        rln.meta2.weight.fill_(1.0)
    x = torch.randn(1, 8, 4, 4, dtype=torch.float64) * 2 + 0.7
    stats = rln.normalize(x)
    restored = rln.restore(stats.normalized, stats.mean, stats.std)
    assert torch.allclose(restored.mean(dim=1), x.mean(dim=1), atol=1e-4)
    assert torch.allclose(restored.var(dim=1, unbiased=False), x.var(dim=1, unbiased=False), atol=1e-4)


def test_rln_constant_input_stays_finite() -> None:
    normed, _, _ = RLN(4)(torch.full((1, 4, 3, 3), 2.0))
    assert bool(torch.isfinite(normed).all())
    assert torch.allclose(normed, torch.zeros_like(normed))


# ── MLP ───────────────────────────────────────────────────────────────────────


def test_frelu_with_zero_funnel_is_relu() -> None:
    frelu = FReLU(4)
    _zero(frelu)
    x = torch.randn(1, 4, 5, 5)
    assert torch.equal(frelu(x), torch.relu(x))


def test_mlp_preserves_shape() -> None:
    x = torch.randn(2, 8, 6, 6)
    assert Mlp(4, 8, ratio=2.0)(x).shape == x.shape


def test_mlp_rejects_ratio_below_one() -> None:
    with pytest.raises(ConfigurationError):
        Mlp(4, 8, ratio=0.5)


def test_mlp_gradcheck() -> None:
    mlp = Mlp(4, 8, ratio=2.0).double()
    x = torch.randn(1, 8, 4, 4, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(mlp, (x,), atol=1e-6, rtol=1e-3)


# ── Window attention ──────────────────────────────────────────────────────────


def test_window_partition_round_trip() -> None:
    x = torch.randn(2, 16, 24, 5)
    windows = window_partition(x, 8)
    assert windows.shape == (2 * 2 * 3, 64, 5)
    assert torch.equal(window_reverse(windows, 8, 16, 24), x)


@pytest.mark.parametrize(("h", "w", "shift"), [(16, 16, 0), (13, 19, 0), (16, 16, 4), (10, 7, 4)])
def test_window_block_preserves_shape(h: int, w: int, shift: int) -> None:
    x = torch.randn(1, 8, h, w)
    assert WindowBlock(4, 8, 2, window_size=8, shift_size=shift)(x).shape == x.shape


@pytest.mark.parametrize("shift", [0, 4])
def test_window_attention_rows_sum_to_one(shift: int) -> None:
    block = WindowBlock(4, 8, 2, window_size=8, shift_size=shift).double()
    maps = block.attention_maps(torch.randn(1, 8, 12, 20, dtype=torch.float64))
    assert maps.shape[-2:] == (64, 64)
    assert torch.allclose(maps.sum(-1), torch.ones_like(maps[..., 0]), atol=1e-6)


def test_window_block_with_zero_projections_is_identity() -> None:
    block = WindowBlock(4, 8, 2)
    _zero(block.attn.proj, block.norm.meta2, block.mlp.fc2)
    x = torch.randn(1, 8, 16, 16)
    assert torch.equal(block(x), x)


# ── Colour restoration block ──────────────────────────────────────────────────


def test_crb_preserves_shape() -> None:
    x = torch.randn(2, 16, 10, 12)
    assert ColorRestorationBlock(4, 16, 4)(x).shape == x.shape


def test_crb_attention_is_channel_by_channel() -> None:
    crb = ColorRestorationBlock(4, 16, 4)
    small = crb.attention_maps(torch.randn(1, 16, 8, 8))
    large = crb.attention_maps(torch.randn(1, 16, 16, 16))
    assert small.shape == large.shape == (1, 4, 4, 4)


def test_crb_attention_rows_sum_to_one() -> None:
    crb = ColorRestorationBlock(4, 16, 2).double()
    maps = crb.attention_maps(torch.randn(1, 16, 9, 7, dtype=torch.float64))
    assert torch.allclose(maps.sum(-1), torch.ones_like(maps[..., 0]), atol=1e-6)


def test_crb_rejects_indivisible_heads() -> None:
    with pytest.raises(ConfigurationError):
        ColorRestorationBlock(4, 10, 4)


def test_crb_temperature_starts_at_root_head_dim() -> None:
    crb = ColorRestorationBlock(4, 16, 4)
    assert torch.allclose(crb.attn.temperature, torch.full((4, 1, 1), 2.0))


# ── Fusion ────────────────────────────────────────────────────────────────────


def test_cfb_weights_are_even_for_identical_inputs() -> None:
    x = torch.randn(2, 8, 5, 5, dtype=torch.float64)
    alpha = ChannelFusionBlock.weights(x, x)
    assert alpha.shape == (2, 2, 8, 1, 1)
    assert torch.allclose(alpha, torch.full_like(alpha, 0.5), atol=1e-12)


def test_cfb_weights_sum_to_one() -> None:
    x1, x2 = torch.randn(2, 3, 8, 5, 5, dtype=torch.float64)
    alpha = ChannelFusionBlock.weights(x1, x2)
    assert torch.allclose(alpha.sum(dim=1), torch.ones(3, 8, 1, 1, dtype=torch.float64), atol=1e-6)


def test_cfb_with_zero_refinement_averages_identical_inputs() -> None:
    cfb = ChannelFusionBlock(8)
    _zero(cfb.pw, cfb.dw)
    x = torch.randn(1, 8, 6, 6)
    assert torch.allclose(cfb(x, x), x, atol=1e-6)


def test_fusion_rejects_shape_mismatch() -> None:
    with pytest.raises(DimensionError):
        ChannelFusionBlock(8)(torch.zeros(1, 8, 4, 4), torch.zeros(1, 8, 4, 5))


@pytest.mark.parametrize("kind", ["cfb", "sk", "concat", "add"])
def test_every_fusion_keeps_shape(kind: str) -> None:
    x1, x2 = torch.randn(2, 1, 16, 6, 6)
    assert make_fusion(kind, 16)(x1, x2).shape == x1.shape


def test_sk_fusion_of_identical_inputs_is_the_input() -> None:
    x = torch.randn(1, 16, 4, 4)
    assert torch.allclose(SKFusion(16)(x, x), x, atol=1e-6)


# ── Resampling ────────────────────────────────────────────────────────────────


def test_downsample_shape() -> None:
    assert Downsample(32, 64)(torch.randn(1, 32, 64, 64)).shape == (1, 64, 32, 32)


def test_upsample_restores_spatial_dims() -> None:
    assert Upsample(64, 32)(torch.randn(1, 64, 32, 32)).shape == (1, 32, 64, 64)


def test_upsample_rejects_indivisible_channels() -> None:
    with pytest.raises(ConfigurationError):
        Upsample(6, 4)


def test_downsample_rejects_odd_dims() -> None:
    with pytest.raises(DimensionError):
        Downsample(4, 8)(torch.randn(1, 4, 5, 6))


def test_pixel_shuffle_is_a_permutation() -> None:
    up = Upsample(8, 2)
    with torch.no_grad():
        up.proj.weight.copy_(torch.eye(8).view(8, 8, 1, 1))
        up.proj.bias.zero_()
    x = torch.randn(1, 8, 3, 3)
    out = up(x)
    assert torch.equal(out.flatten().sort().values, x.flatten().sort().values)
