"""Tests for the assembled WaterFormer and its footprint counters."""

import pytest
import torch
import torch.nn as nn

from waterformer.errors import DivergenceError
from waterformer.losses import total_loss
from waterformer.models import ModelConfig
from waterformer.net.blocks import ColorRestorationBlock, WindowBlock
from waterformer.net.waterformer import WaterFormer, count_macs, count_params, enhance_image


@pytest.fixture(scope="module")
def net() -> WaterFormer:
    torch.manual_seed(0)
    return WaterFormer(ModelConfig()).eval()


@pytest.mark.parametrize("size", [64, 250])
def test_fresh_network_is_the_identity(net: WaterFormer, size: int) -> None:
    x = torch.rand(1, 3, size, size)
    with torch.no_grad():
        assert torch.equal(net(x), x)


def test_output_shape_matches_odd_input(net: WaterFormer) -> None:
    nn.init.normal_(net.head.weight, std=0.01)
    try:
        with torch.no_grad():
            assert net(torch.rand(2, 3, 30, 22)).shape == (2, 3, 30, 22)
    finally:
        nn.init.zeros_(net.head.weight)


def test_tiny_input_uses_replicate_padding(net: WaterFormer) -> None:
    with torch.no_grad():
        assert net(torch.rand(1, 3, 2, 3)).shape == (1, 3, 2, 3)


def test_enhance_image_clamps(net: WaterFormer) -> None:
    nn.init.constant_(net.head.bias, 0.0)
    with torch.no_grad():
        net.head.bias[3:].fill_(-2.0)
    try:
        out = enhance_image(net, torch.rand(3, 16, 16))
        assert out.shape == (3, 16, 16)
        assert float(out.max()) == 1.0
    finally:
        nn.init.zeros_(net.head.bias)


def test_stages_host_the_crb_last() -> None:
    cfg = ModelConfig()
    stages = WaterFormer(cfg).stages()
    for name, stage in stages.items():
        blocks = list(stage.blocks)
        assert isinstance(blocks[-1], ColorRestorationBlock)
        assert all(isinstance(b, WindowBlock) for b in blocks[:-1])
    assert len(stages["encoder3"].blocks) == cfg.stage_depths[2]


def test_without_crb_every_block_is_windowed() -> None:
    stages = WaterFormer(ModelConfig(use_crb=False)).stages()
    assert all(isinstance(b, WindowBlock) for stage in stages.values() for b in stage.blocks)


def test_window_shift_alternates() -> None:
    blocks = list(WaterFormer(ModelConfig(use_crb=False, stage_depths=(2, 2, 4))).encoder3.blocks)
    assert [b.attn.shift_size for b in blocks] == [0, 4, 0, 4]


@pytest.mark.parametrize("kind", ["soft", "global_residual"])
def test_alternative_reconstructions_start_as_identity(kind: str) -> None:
    net = WaterFormer(ModelConfig(recon_kind=kind)).eval()
    x = torch.rand(1, 3, 32, 32)
    with torch.no_grad():
        assert torch.equal(net(x), x)


def test_debug_mode_flags_non_finite_activations() -> None:
    net = WaterFormer(ModelConfig(debug=True)).eval()
    x = torch.rand(1, 3, 16, 16)
    x[0, 0, 0, 0] = float("nan")
    with torch.no_grad(), pytest.raises(DivergenceError, match="encoder1"):
        net(x)


def test_forward_is_deterministic(net: WaterFormer) -> None:
    x = torch.rand(1, 3, 32, 32)
    with torch.no_grad():
        assert torch.equal(net(x), net(x))


def test_loss_gradients_match_finite_differences() -> None:
    gen = torch.Generator().manual_seed(3)
    torch.manual_seed(3)
    net = WaterFormer(ModelConfig()).double().eval()
    nn.init.normal_(net.head.weight, std=0.05)
    x = torch.rand(1, 3, 16, 16, generator=gen, dtype=torch.float64)
    gt = torch.rand(1, 3, 16, 16, generator=gen, dtype=torch.float64)

    def loss() -> torch.Tensor:
        return total_loss(gt, net(x))[0]

    params = list(net.parameters())
    net.zero_grad()
    loss().backward()

    analytic, numeric = [], []
    eps = 1e-6
    for _ in range(200):
        p = params[int(torch.randint(len(params), (1,), generator=gen))]
        i = int(torch.randint(p.numel(), (1,), generator=gen))
        flat = p.data.view(-1)
        original = float(flat[i])
        with torch.no_grad():
            flat[i] = original + eps
            up = float(loss())
            flat[i] = original - eps
            down = float(loss())
            flat[i] = original
        analytic.append(0.0 if p.grad is None else float(p.grad.view(-1)[i]))
        numeric.append((up - down) / (2 * eps))
    torch.testing.assert_close(
        torch.tensor(analytic, dtype=torch.float64), torch.tensor(numeric, dtype=torch.float64), rtol=1e-4, atol=1e-7
    )


# ── Footprint ─────────────────────────────────────────────────────────────────


def test_single_conv_params_and_macs() -> None:
    conv = nn.Conv2d(3, 16, 3, padding=1)
    assert count_params(conv) == 448
    assert count_macs(conv, 256, 256) == 28_311_552


def test_two_layer_toy_param_count() -> None:
    toy = nn.Sequential(nn.Conv2d(3, 16, 3, padding=1), nn.Conv2d(16, 3, 1))
    assert count_params(toy) == 3 * 16 * 9 + 16 + 16 * 3 + 3


def test_reference_params_in_bracket(net: WaterFormer) -> None:
    assert 200_000 <= count_params(net) <= 500_000


def test_reference_macs_in_bracket(net: WaterFormer) -> None:
    assert 4e9 <= count_macs(net, 256, 256) <= 12e9


def test_reference_params_match_layer_arithmetic(net: WaterFormer) -> None:
    assert count_params(net) == 310_998


def test_cfb_adds_pointwise_and_depthwise_refinement() -> None:
    with_add = count_params(WaterFormer(ModelConfig(use_cfb=False)))
    with_cfb = count_params(WaterFormer(ModelConfig()))
    # Per skip: 1×1 conv (d² + d) and depthwise 3×3 (9d + d); add fusion has none.
    assert with_cfb - with_add == sum(d * d + 11 * d for d in (48, 24))


def test_ablated_base_stays_in_bracket() -> None:
    assert 200_000 <= count_params(WaterFormer(ModelConfig(use_crb=False, use_cfb=False))) <= 500_000
