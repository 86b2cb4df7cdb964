"""Training losses: reconstruction ℓ1, chromatic consistency and Sobel colour.

All losses take ``(..., 3, H, W)`` tensors and return a scalar tensor.
"""

from typing import Literal, NamedTuple

import torch
import torch.nn.functional as F

from .color_space import rgb_to_yiq
from .errors import DimensionError
from .models import ChromaConfig, LossWeights

SOBEL_X = ((-1.0, 0.0, 1.0), (-2.0, 0.0, 2.0), (-1.0, 0.0, 1.0))

SimilarityForm = Literal["balanced", "literal"]


class LossParts(NamedTuple):
    l1: torch.Tensor
    chroma: torch.Tensor
    sobel: torch.Tensor


def _check_same(gt: torch.Tensor, pred: torch.Tensor) -> None:
    if gt.shape != pred.shape:
        raise DimensionError(f"gt {tuple(gt.shape)} and pred {tuple(pred.shape)} differ in shape")


def _covariance_weight(form: SimilarityForm) -> float:
    return 2.0 if form == "balanced" else 1.0


# ── Reconstruction ────────────────────────────────────────────────────────────


def l1_loss(gt: torch.Tensor, pred: torch.Tensor) -> torch.Tensor:
    _check_same(gt, pred)
    return (gt - pred).abs().mean()


# ── Chromatic consistency ─────────────────────────────────────────────────────


def chroma_similarity(
    gt_c: torch.Tensor, pred_c: torch.Tensor, c: float, form: SimilarityForm = "balanced"
) -> torch.Tensor:
    """Similarity of two equal-size chroma windows, population statistics."""
    _check_same(gt_c, pred_c)
    gt_mean, pred_mean = gt_c.mean(), pred_c.mean()
    cov = ((gt_c - gt_mean) * (pred_c - pred_mean)).mean()
    var_gt = ((gt_c - gt_mean) ** 2).mean()
    var_pred = ((pred_c - pred_mean) ** 2).mean()
    return (_covariance_weight(form) * cov + c) / (var_gt + var_pred + c)


def _box_mean(x: torch.Tensor, window: int, stride: int) -> torch.Tensor:
    """Mean over every ``window×window`` valid window of ``N×H×W`` via a summed-area table."""
    sat = F.pad(x.cumsum(-1).cumsum(-2), (1, 0, 1, 0))
    sums = sat[:, window:, window:] - sat[:, :-window, window:] - sat[:, window:, :-window] + sat[:, :-window, :-window]
    return sums[:, ::stride, ::stride] / (window * window)


def _window_similarity(
    a: torch.Tensor, b: torch.Tensor, cfg: ChromaConfig, c: float
) -> torch.Tensor:
    # Second moments are shift invariant; centring first keeps float32 SATs accurate.
    a = a - a.mean(dim=(-2, -1), keepdim=True)
    b = b - b.mean(dim=(-2, -1), keepdim=True)
    mean_a = _box_mean(a, cfg.window, cfg.stride)
    mean_b = _box_mean(b, cfg.window, cfg.stride)
    var_a = _box_mean(a * a, cfg.window, cfg.stride) - mean_a**2
    var_b = _box_mean(b * b, cfg.window, cfg.stride) - mean_b**2
    cov = _box_mean(a * b, cfg.window, cfg.stride) - mean_a * mean_b
    return (_covariance_weight(cfg.similarity_form) * cov + c) / (var_a + var_b + c)


def chroma_loss(gt: torch.Tensor, pred: torch.Tensor, cfg: ChromaConfig | None = None) -> torch.Tensor:
    """Mean over all valid windows of ``1 − S_I·S_Q`` on the YIQ chroma planes.

    Raises:
        DimensionError: Shapes differ or the image is smaller than the window.
    """
    cfg = cfg or ChromaConfig()
    _check_same(gt, pred)
    h, w = gt.shape[-2:]
    if h < cfg.window or w < cfg.window:
        raise DimensionError(f"image {h}×{w} is smaller than the {cfg.window}×{cfg.window} chroma window")

    gt_yiq = rgb_to_yiq(gt.reshape(-1, 3, h, w))
    pred_yiq = rgb_to_yiq(pred.reshape(-1, 3, h, w))
    s_i = _window_similarity(gt_yiq.i, pred_yiq.i, cfg, cfg.c1)
    s_q = _window_similarity(gt_yiq.q, pred_yiq.q, cfg, cfg.c2)
    if cfg.clip_similarity:
        s_i = s_i.clamp(0.0, 1.0)
        s_q = s_q.clamp(0.0, 1.0)
    return (1.0 - s_i * s_q).mean()


# ── Sobel colour ──────────────────────────────────────────────────────────────


def _sobel_kernels(dtype: torch.dtype, device: torch.device) -> torch.Tensor:
    kx = torch.tensor(SOBEL_X, dtype=dtype, device=device)
    return torch.stack((kx, kx.T)).unsqueeze(1).repeat(3, 1, 1, 1)


def sobel_gradients(img: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Valid (unpadded) per-channel Sobel responses of ``N×3×H×W`` images."""
    out = F.conv2d(img, _sobel_kernels(img.dtype, img.device), groups=3)
    return out[:, 0::2], out[:, 1::2]


def sobel_color_loss(gt: torch.Tensor, pred: torch.Tensor) -> torch.Tensor:
    """x-term plus y-term, each the channel-averaged ℓ1 between gradient maps."""
    _check_same(gt, pred)
    h, w = gt.shape[-2:]
    if h < 3 or w < 3:
        raise DimensionError(f"Sobel loss needs at least 3×3 images, got {h}×{w}")
    gx_gt, gy_gt = sobel_gradients(gt.reshape(-1, 3, h, w))
    gx_pred, gy_pred = sobel_gradients(pred.reshape(-1, 3, h, w))
    return (gx_gt - gx_pred).abs().mean() + (gy_gt - gy_pred).abs().mean()


# ── Total ─────────────────────────────────────────────────────────────────────


def total_loss(
    gt: torch.Tensor,
    pred: torch.Tensor,
    weights: LossWeights | None = None,
    chroma: ChromaConfig | None = None,
) -> tuple[torch.Tensor, LossParts]:
    """Weighted sum of the three terms and the terms themselves.

    Terms with zero weight are still reported but computed without autograd
    and left out of the sum.
    """
    weights = weights or LossWeights()
    terms = (
        (weights.l1, lambda: l1_loss(gt, pred)),
        (weights.chroma, lambda: chroma_loss(gt, pred, chroma)),
        (weights.sobel, lambda: sobel_color_loss(gt, pred)),
    )
    parts: list[torch.Tensor] = []
    total: torch.Tensor | None = None
    for weight, compute in terms:
        if weight == 0:
            with torch.no_grad():
                parts.append(compute())
            continue
        value = compute()
        parts.append(value)
        total = weight * value if total is None else total + weight * value
    if total is None:
        total = torch.zeros((), dtype=pred.dtype, device=pred.device, requires_grad=pred.requires_grad)
    return total, LossParts(*parts)
