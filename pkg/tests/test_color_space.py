"""Tests for the RGB↔YIQ transform."""

import pytest
import torch

from waterformer.color_space import ImageYIQ, channel_stats, clamp_unit, rgb_to_yiq, yiq_to_rgb


def _pixel(r: float, g: float, b: float) -> torch.Tensor:
    return torch.tensor([r, g, b], dtype=torch.float64).view(3, 1, 1)


def _yiq_pixel(img: ImageYIQ) -> tuple[float, float, float]:
    return float(img.y), float(img.i), float(img.q)


def test_red_maps_to_first_matrix_column() -> None:
    assert _yiq_pixel(rgb_to_yiq(_pixel(1, 0, 0))) == (0.299, 0.596, 0.211)


def test_white_has_unit_luma_and_no_chroma() -> None:
    y, i, q = _yiq_pixel(rgb_to_yiq(_pixel(1, 1, 1)))
    assert y == pytest.approx(1.0, abs=1e-12)
    assert i == pytest.approx(0.0, abs=1e-12)
    assert q == pytest.approx(0.0, abs=1e-12)


def test_black_stays_black() -> None:
    assert _yiq_pixel(rgb_to_yiq(_pixel(0, 0, 0))) == (0.0, 0.0, 0.0)


def test_round_trip_on_random_images() -> None:
    gen = torch.Generator().manual_seed(3)
    images = torch.rand(1000, 3, 4, 4, generator=gen, dtype=torch.float64)
    back = yiq_to_rgb(rgb_to_yiq(images))
    assert float((back.image - images).abs().max()) <= 1e-6


def test_unit_luma_maps_back_to_white() -> None:
    yiq = ImageYIQ(torch.ones(1, 1), torch.zeros(1, 1), torch.zeros(1, 1))
    out = yiq_to_rgb(yiq).image
    assert torch.allclose(out.flatten(), torch.ones(3), atol=1e-6)


def test_transform_is_linear() -> None:
    gen = torch.Generator().manual_seed(1)
    x, y = torch.rand(2, 3, 5, 5, generator=gen, dtype=torch.float64)
    lhs = rgb_to_yiq(0.3 * x + 0.7 * y).stack()
    rhs = 0.3 * rgb_to_yiq(x).stack() + 0.7 * rgb_to_yiq(y).stack()
    assert torch.allclose(lhs, rhs, atol=1e-12)


def test_gray_pixels_have_no_chroma() -> None:
    gray = torch.rand(1, 6, 6, dtype=torch.float64).expand(3, 6, 6)
    yiq = rgb_to_yiq(gray)
    assert float(yiq.i.abs().max()) <= 1e-9
    assert float(yiq.q.abs().max()) <= 1e-9


def test_conversion_does_not_clamp() -> None:
    y, _, _ = _yiq_pixel(rgb_to_yiq(_pixel(-0.5, -0.5, -0.5)))
    assert y == pytest.approx(-0.5, abs=1e-12)


def test_clamp_reports_excursion() -> None:
    clamped = clamp_unit(torch.tensor([-0.2, 0.5, 1.1]))
    assert clamped.image.tolist() == [0.0, 0.5, 1.0]
    assert clamped.excursion == pytest.approx(0.2)


def test_clamp_in_range_has_no_excursion() -> None:
    assert clamp_unit(torch.tensor([0.0, 1.0])).excursion == 0.0


@pytest.mark.parametrize(
    ("values", "mean", "variance"),
    [
        ([0.5, 0.5, 0.5], 0.5, 0.0),
        ([0.0, 1.0], 0.5, 0.25),
        ([0.2, 0.4, 0.6], 0.4, 0.0266667),
    ],
)
def test_channel_stats_use_population_variance(values: list[float], mean: float, variance: float) -> None:
    m, v = channel_stats(torch.tensor(values, dtype=torch.float64))
    assert float(m) == pytest.approx(mean, abs=1e-9)
    assert float(v) == pytest.approx(variance, abs=1e-6)
