"""Full-reference (SSIM, PSNR, NRMSE) and no-reference (UCIQE, UIQM) scores.

Every function takes ``H×W×3`` float arrays in [0, 1] (``image_io.to_numpy``)
or ``3×H×W`` tensors, and returns a Python float.
"""

import logging
import math
from typing import Iterator, Literal

import numpy as np
import torch
from skimage import color, filters
from skimage.metrics import normalized_root_mse, structural_similarity

from .color_space import YIQ_MATRIX
from .errors import DimensionError, DomainError
from .image_io import to_numpy
from .models import MetricReport, MetricRow

logger = logging.getLogger(__name__)

SSIM_SIGMA = 1.5
SSIM_MIN_SIDE = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# UCIQE: weights of chroma spread, luminance contrast and mean saturation.
UCIQE_COEFFS = (0.4680, 0.2745, 0.2576)
# Chroma below this (about 0.13 Lab units) counts as neutral.
CHROMA_FLOOR = 1e-3
# UIQM: weights of colourfulness, sharpness and contrast.
UIQM_COEFFS = (0.0282, 0.2953, 3.5753)
UICM_TRIM = 0.1
UIQM_BLOCK = 8
PLIP_GAMMA = 1026.0

NrmseNorm = Literal["euclidean", "min-max"]


def _as_hwc(img: np.ndarray | torch.Tensor) -> np.ndarray:
    if isinstance(img, torch.Tensor):
        return to_numpy(img)
    return np.asarray(img, dtype=np.float64)


def _pair(gt: np.ndarray | torch.Tensor, pred: np.ndarray | torch.Tensor) -> tuple[np.ndarray, np.ndarray]:
    a, b = _as_hwc(gt), _as_hwc(pred)
    if a.shape != b.shape:
        raise DimensionError(f"gt {a.shape} and pred {b.shape} differ in shape")
    return a, b


def luma(img: np.ndarray) -> np.ndarray:
    """Y plane of the YIQ transform."""
    return img @ np.asarray(YIQ_MATRIX[0], dtype=np.float64)


# ── Full reference ────────────────────────────────────────────────────────────


def psnr(gt: np.ndarray | torch.Tensor, pred: np.ndarray | torch.Tensor) -> float:
    """Peak 1.0; identical images give ``math.inf``."""
    a, b = _pair(gt, pred)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim(gt: np.ndarray | torch.Tensor, pred: np.ndarray | torch.Tensor, per_channel: bool = False) -> float:
    """Single-scale SSIM, 11×11 Gaussian window (σ = 1.5), population statistics.

    Computed on luma unless ``per_channel`` is set, in which case the three
    RGB channel scores are averaged.

    Raises:
        DimensionError: Shapes differ or a side is below 11 px.
    """
    a, b = _pair(gt, pred)
    if min(a.shape[:2]) < SSIM_MIN_SIDE:
        raise DimensionError(f"SSIM needs images of at least {SSIM_MIN_SIDE}×{SSIM_MIN_SIDE}, got {a.shape[:2]}")
    kwargs = dict(
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        data_range=1.0,
        K1=SSIM_K1,
        K2=SSIM_K2,
    )
    if per_channel:
        return float(structural_similarity(a, b, channel_axis=-1, **kwargs))
    return float(structural_similarity(luma(a), luma(b), **kwargs))


def nrmse(gt: np.ndarray | torch.Tensor, pred: np.ndarray | torch.Tensor, normalization: NrmseNorm = "euclidean") -> float:
    """RMSE over the RMS of ``gt`` (``euclidean``) or over its range (``min-max``).

    Raises:
        DomainError: The normaliser of ``gt`` is zero.
    """
    a, b = _pair(gt, pred)
    denom = float(np.sqrt(np.mean(a * a))) if normalization == "euclidean" else float(a.max() - a.min())
    if denom == 0.0:
        raise DomainError(f"NRMSE undefined: {normalization} norm of the reference is zero")
    return float(normalized_root_mse(a, b, normalization=normalization))


# ── No reference ──────────────────────────────────────────────────────────────


def uciqe_terms(img: np.ndarray | torch.Tensor) -> tuple[float, float, float]:
    """(chroma standard deviation, 1–99 % luminance contrast, mean saturation).

    Lab is scaled so L, a and b lie roughly in [0, 1] / [-1, 1].
    """
    lab = color.rgb2lab(np.clip(_as_hwc(img), 0.0, 1.0))
    lum = lab[..., 0] / 100.0
    chroma = np.hypot(lab[..., 1] / 128.0, lab[..., 2] / 128.0)
    # rgb2lab leaves a small a/b residue on greys.
    chroma[chroma < CHROMA_FLOOR] = 0.0
    sigma_c = float(np.std(chroma))
    low, high = np.percentile(lum, [1.0, 99.0])
    norm = np.hypot(chroma, lum)
    saturation = np.divide(chroma, norm, out=np.zeros_like(chroma), where=norm > 0)
    return sigma_c, float(high - low), float(saturation.mean())


def uciqe(img: np.ndarray | torch.Tensor) -> float:
    return float(np.dot(UCIQE_COEFFS, uciqe_terms(img)))


def _blocks(channel: np.ndarray, size: int) -> Iterator[np.ndarray]:
    """Tiles of ``size×size``; the last row/column of tiles absorbs the remainder."""
    h, w = channel.shape
    ny, nx = max(1, math.ceil(h / size)), max(1, math.ceil(w / size))
    for i in range(ny):
        y1 = h if i == ny - 1 else (i + 1) * size
        for j in range(nx):
            x1 = w if j == nx - 1 else (j + 1) * size
            yield channel[i * size : y1, j * size : x1]


def _trimmed_stats(values: np.ndarray, alpha: float) -> tuple[float, float]:
    ordered = np.sort(values, axis=None)
    cut = int(alpha * ordered.size)
    kept = ordered[cut : ordered.size - cut] if cut else ordered
    mean = float(kept.mean())
    return mean, float(np.mean((kept - mean) ** 2))


def uicm(rgb255: np.ndarray) -> float:
    rg = rgb255[..., 0] - rgb255[..., 1]
    yb = (rgb255[..., 0] + rgb255[..., 1]) / 2.0 - rgb255[..., 2]
    mu_rg, var_rg = _trimmed_stats(rg, UICM_TRIM)
    mu_yb, var_yb = _trimmed_stats(yb, UICM_TRIM)
    return -0.0268 * math.hypot(mu_rg, mu_yb) + 0.1586 * math.sqrt(var_rg + var_yb)


def eme(channel: np.ndarray, block: int = UIQM_BLOCK) -> float:
    tiles = list(_blocks(channel, block))
    weight = 2.0 / len(tiles)
    total = 0.0
    for tile in tiles:
        lo, hi = float(tile.min()), float(tile.max())
        total += weight * math.log((hi or 1.0) / (lo or 1.0))
    return total


def uism(rgb255: np.ndarray) -> float:
    weights = (0.299, 0.587, 0.114)
    score = 0.0
    for c, weight in enumerate(weights):
        channel = rgb255[..., c]
        edges = np.clip(np.rint(channel * filters.sobel(channel)), 0.0, 255.0)
        score += weight * eme(edges)
    return score


def _plip_sum(a: float, b: float) -> float:
    return a + b - a * b / PLIP_GAMMA


def _plip_sub(a: float, b: float) -> float:
    return PLIP_GAMMA * (a - b) / (PLIP_GAMMA - b)


def _plip_scale(c: float, a: float) -> float:
    return PLIP_GAMMA - PLIP_GAMMA * (1.0 - a / PLIP_GAMMA) ** c


def uiconm(gray: np.ndarray, block: int = UIQM_BLOCK) -> float:
    """PLIP log-AMEE contrast over tiles of the gray image."""
    tiles = list(_blocks(gray, block))
    total = 0.0
    for tile in tiles:
        lo, hi = float(tile.min()), float(tile.max())
        bottom = _plip_sum(hi, lo)
        m = _plip_sub(hi, lo) / bottom if bottom else 0.0
        if m > 0.0:
            total += m * math.log(m)
    return _plip_scale(1.0 / len(tiles), total)


def uiqm_terms(img: np.ndarray | torch.Tensor) -> tuple[float, float, float]:
    """(UICM, UISM, UIConM) of an image in [0, 1]."""
    rgb = np.clip(_as_hwc(img), 0.0, 1.0)
    rgb255 = rgb * 255.0
    return uicm(rgb255), uism(rgb255), uiconm(color.rgb2gray(rgb))


def uiqm(img: np.ndarray | torch.Tensor) -> float:
    return float(np.dot(UIQM_COEFFS, uiqm_terms(img)))


# ── Reports ───────────────────────────────────────────────────────────────────


def score_image(
    image_id: str,
    pred: np.ndarray | torch.Tensor,
    ref: np.ndarray | torch.Tensor | None = None,
    per_channel_ssim: bool = False,
    nrmse_norm: NrmseNorm = "euclidean",
) -> MetricRow:
    """All applicable metrics of one image; no-reference only when ``ref`` is None."""
    img = _as_hwc(pred)
    row = MetricRow(id=image_id, uciqe=uciqe(img), uiqm=uiqm(img))
    if ref is not None:
        gt = _as_hwc(ref)
        row.ssim = ssim(gt, img, per_channel=per_channel_ssim)
        row.psnr = psnr(gt, img)
        row.nrmse = nrmse(gt, img, nrmse_norm)
    logger.debug("scored %s: %s", image_id, row.model_dump(exclude_none=True))
    return row


def report_rows(report: MetricReport) -> list[list[str]]:
    """Table rows in ``id, ssim, psnr, nrmse, uciqe, uiqm`` order; blanks for absent values."""

    def cell(value: float | None) -> str:
        return "" if value is None else repr(float(value))

    return [[r.id, cell(r.ssim), cell(r.psnr), cell(r.nrmse), cell(r.uciqe), cell(r.uiqm)] for r in report.rows]
