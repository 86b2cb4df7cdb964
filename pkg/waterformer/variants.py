"""Ablation registry and the per-variant train-and-evaluate harness."""

import logging
from dataclasses import dataclass
from pathlib import Path

from .checkpoint import load_checkpoint
from .data import PairedDataset
from .errors import ConfigurationError, DataError
from .metrics import score_image
from .models import (
    DatasetManifest,
    FusionKind,
    LossRecord,
    MetricReport,
    ReconKind,
    TrainConfig,
    VariantName,
    VariantSummary,
)
from .net.waterformer import enhance_image
from .training import fit

logger = logging.getLogger(__name__)

TREND_WINDOW = 10


@dataclass(frozen=True)
class VariantSpec:
    crb: bool
    cfb: bool
    chroma: bool
    sobel: bool
    change: str = ""
    mlp_activation: str = "frelu"
    recon_kind: ReconKind = "uw_soft"
    fusion_kind: FusionKind = "cfb"


VARIANTS: dict[VariantName, VariantSpec] = {
    "base": VariantSpec(crb=False, cfb=False, chroma=False, sobel=False),
    "v1": VariantSpec(crb=True, cfb=False, chroma=False, sobel=False),
    "v2": VariantSpec(crb=True, cfb=True, chroma=False, sobel=False),
    "v3": VariantSpec(crb=True, cfb=True, chroma=True, sobel=False),
    "v4": VariantSpec(crb=True, cfb=True, chroma=False, sobel=True),
    "v5": VariantSpec(crb=True, cfb=True, chroma=True, sobel=True),
    "relu_mlp": VariantSpec(True, True, True, True, change="FReLU→ReLU", mlp_activation="relu"),
    "recon_plain": VariantSpec(True, True, True, True, change="UW soft recon→global residual", recon_kind="global_residual"),
    "recon_soft": VariantSpec(True, True, True, True, change="UW soft recon→soft recon", recon_kind="soft"),
    "skfusion": VariantSpec(True, False, True, True, change="CFB→SK fusion", fusion_kind="sk"),
}


def variant_spec(name: str) -> VariantSpec:
    if name not in VARIANTS:
        raise ConfigurationError(f"Unknown variant '{name}'. Known variants: {', '.join(VARIANTS)}")
    return VARIANTS[name]


def variant_config(name: str, base: TrainConfig | None = None) -> TrainConfig:
    """``base`` with the model switches and loss weights of one variant.

    Disabled loss terms get weight 0; enabled ones keep ``base``'s weights.
    """
    spec = variant_spec(name)
    base = base or TrainConfig()
    model = base.model.model_copy(
        update={
            "use_crb": spec.crb,
            "use_cfb": spec.cfb,
            "fusion_kind": spec.fusion_kind,
            "recon_kind": spec.recon_kind,
            "mlp_activation": spec.mlp_activation,
        }
    )
    weights = base.weights.model_copy(
        update={
            "chroma": base.weights.chroma if spec.chroma else 0.0,
            "sobel": base.weights.sobel if spec.sobel else 0.0,
        }
    )
    return base.model_copy(update={"variant": name, "model": model, "weights": weights})


def _window_mean(records: list[LossRecord]) -> float:
    return sum(r.total for r in records) / len(records)


def held_out_split(manifest: DatasetManifest) -> str:
    """Test split, or validation when the corpus has no test pairs."""
    for split in ("test", "val"):
        if manifest.split(split):
            return split
    raise DataError(f"manifest under {manifest.root} has neither test nor validation pairs")


def run_variant(
    name: str,
    manifest: DatasetManifest,
    base: TrainConfig,
    out_dir: Path,
) -> tuple[VariantSummary, list[LossRecord], MetricReport]:
    """Train one variant from scratch and score its best-validation checkpoint
    on the held-out split; the loss trend comes from the full training curve.
    """
    spec = variant_spec(name)
    config = variant_config(name, base)
    split = held_out_split(manifest)
    logger.info("variant %s: training %d epochs, evaluating on %s", name, config.epochs, split)

    run_dir = Path(out_dir) / name
    state, _ = fit(config, manifest, run_dir)
    best = load_checkpoint(run_dir / "best.wfk", restore_rng=False)
    logger.info("variant %s: scoring epoch %d (val PSNR %s)", name, best.best_epoch, best.best_val_psnr)
    held_out = PairedDataset(manifest.split(split), manifest.root, config.image_size, config.interpolation)
    rows = []
    for index in range(len(held_out)):
        sample = held_out.sample(index)
        rows.append(score_image(sample.id, enhance_image(best.model, sample.degraded), sample.reference))
    report = MetricReport.from_rows(rows)

    curve = state.history
    summary = VariantSummary(
        variant=name,
        crb=spec.crb,
        cfb=spec.cfb,
        l_chroma=spec.chroma,
        l_sobel=spec.sobel,
        change=spec.change,
        ssim=report.aggregate["ssim"],
        psnr=report.aggregate["psnr"],
        initial_loss=_window_mean(curve[:TREND_WINDOW]),
        final_loss=_window_mean(curve[-TREND_WINDOW:]),
    )
    logger.info("variant %s: ssim %.4f psnr %.3f", name, summary.ssim, summary.psnr)
    return summary, curve, report
