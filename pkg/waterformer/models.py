"""Pydantic V2 models for WaterFormer configuration and run records."""

from datetime import datetime
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _now() -> str:
    return datetime.now().isoformat()


StageName = Literal["encoder1", "encoder2", "encoder3", "decoder2", "decoder1"]
FusionKind = Literal["cfb", "sk", "concat", "add"]
ReconKind = Literal["uw_soft", "soft", "global_residual"]
VariantName = Literal[
    "base", "v1", "v2", "v3", "v4", "v5",
    "relu_mlp", "recon_plain", "recon_soft", "skfusion",
]
SplitName = Literal["train", "val", "test"]

ALL_STAGES: tuple[StageName, ...] = ("encoder1", "encoder2", "encoder3", "decoder2", "decoder1")
METRIC_COLUMNS: tuple[str, ...] = ("ssim", "psnr", "nrmse", "uciqe", "uiqm")


# ── Network ───────────────────────────────────────────────────────────────────


class ModelConfig(BaseModel):
    """Hyperparameters of one WaterFormer instance.

    Stage depths count every block of a stage; when the stage hosts a CRB the
    CRB is its last block.
    """

    stage_widths: tuple[int, int, int] = (24, 48, 96)
    stage_depths: tuple[int, int, int] = (2, 2, 2)
    decoder_depths: tuple[int, int] = (2, 2)
    heads: tuple[int, int, int] = (2, 4, 8)
    window_size: int = Field(default=8, ge=1)
    mlp_ratio: float = Field(default=2.0, ge=1.0)
    mlp_activation: Literal["frelu", "relu"] = "frelu"
    use_crb: bool = True
    crb_stages: tuple[StageName, ...] = ALL_STAGES
    use_cfb: bool = True
    fusion_kind: FusionKind = "cfb"
    recon_kind: ReconKind = "uw_soft"
    qk_norm: bool = True
    clamp_output: bool = False
    debug: bool = False

    @field_validator("stage_widths")
    @classmethod
    def _widths_increase(cls, widths: tuple[int, int, int]) -> tuple[int, int, int]:
        if widths[0] < 1 or not widths[0] < widths[1] < widths[2]:
            raise ValueError("stage_widths must be positive and strictly increase down the encoder")
        return widths

    @field_validator("stage_depths", "decoder_depths", "heads")
    @classmethod
    def _positive(cls, values: tuple[int, ...]) -> tuple[int, ...]:
        if any(v < 1 for v in values):
            raise ValueError("depths and head counts must be >= 1")
        return values

    @property
    def effective_fusion(self) -> FusionKind:
        """Fusion actually used on the skip connections."""
        if self.use_cfb:
            return "cfb"
        return "add" if self.fusion_kind == "cfb" else self.fusion_kind

    def has_crb(self, stage: StageName) -> bool:
        return self.use_crb and stage in self.crb_stages


# ── Losses ────────────────────────────────────────────────────────────────────


class LossWeights(BaseModel):
    """Weights of the reconstruction, chromatic and Sobel terms."""

    l1: float = Field(default=3.0, ge=0)
    chroma: float = Field(default=1.0, ge=0)
    sobel: float = Field(default=3.0, ge=0)

    @model_validator(mode="after")
    def _some_term(self) -> "LossWeights":
        if self.l1 == self.chroma == self.sobel == 0:
            raise ValueError("at least one loss weight must be positive")
        return self


class ChromaConfig(BaseModel):
    """Sliding-window settings of the chromatic consistency loss.

    ``similarity_form`` picks the covariance term of the similarity numerator:
    ``balanced`` uses ``2·σ(a, b)`` so identical windows score exactly 1,
    ``literal`` uses ``σ(a, b)``.
    """

    window: int = 15
    stride: int = Field(default=1, ge=1)
    c1: float = Field(default=0.001, gt=0)
    c2: float = Field(default=0.001, gt=0)
    clip_similarity: bool = False
    similarity_form: Literal["balanced", "literal"] = "balanced"

    @field_validator("window")
    @classmethod
    def _odd_window(cls, window: int) -> int:
        if window < 3 or window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        return window


# ── Training ──────────────────────────────────────────────────────────────────


class TrainConfig(BaseModel):
    """Optimisation protocol. Defaults are the desk-scale protocol."""

    epochs: int = Field(default=30, gt=0)
    batch_size: int = Field(default=4, ge=1)
    lr0: float = Field(default=1e-3, gt=0)
    decay_every: int = Field(default=50, ge=1)
    decay_factor: float = Field(default=0.5, gt=0, le=1)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    grad_clip: float | None = Field(default=None, gt=0)
    seed: int = 0
    image_size: int = Field(default=64, ge=8)
    interpolation: Literal["bilinear", "bicubic", "nearest"] = "bilinear"
    augment: bool = True
    num_workers: int = Field(default=0, ge=0)
    single_thread: bool = True
    variant: VariantName = "v5"
    model: ModelConfig = Field(default_factory=ModelConfig)
    weights: LossWeights = Field(default_factory=LossWeights)
    chroma: ChromaConfig = Field(default_factory=ChromaConfig)

    @classmethod
    def full_preset(cls) -> "TrainConfig":
        """The full protocol: 300 epochs of 256×256 crops, batch 4."""
        return cls(epochs=300, batch_size=4, image_size=256)


# ── Physics ───────────────────────────────────────────────────────────────────


class WaterType(BaseModel):
    """Per-channel attenuation (1/m) and veiling light of a water type."""

    name: str
    kind: Literal["open_sea", "nearshore"]
    beta: tuple[float, float, float]
    background_light: tuple[float, float, float]

    @field_validator("beta")
    @classmethod
    def _positive_beta(cls, beta: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(b <= 0 for b in beta):
            raise ValueError("attenuation coefficients must be > 0")
        return beta

    @field_validator("background_light")
    @classmethod
    def _unit_light(cls, light: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(not 0.0 <= a <= 1.0 for a in light):
            raise ValueError("background light must lie in [0, 1]")
        return light


# ── Data ──────────────────────────────────────────────────────────────────────


class ManifestEntry(BaseModel):
    """One degraded/reference pair; paths are relative to the manifest."""

    degraded: str
    reference: str
    split: SplitName

    @property
    def id(self) -> str:
        return Path(self.degraded).stem


class DatasetManifest(BaseModel):
    """All pairs of a corpus with their split assignment."""

    root: Path
    seed: int = 0
    entries: list[ManifestEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _disjoint_splits(self) -> "DatasetManifest":
        seen: dict[str, str] = {}
        for entry in self.entries:
            other = seen.setdefault(entry.id, entry.split)
            if other != entry.split:
                raise ValueError(f"id '{entry.id}' appears in splits '{other}' and '{entry.split}'")
        return self

    def split(self, name: SplitName) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]


# ── Run records ───────────────────────────────────────────────────────────────


class LossRecord(BaseModel):
    """One optimisation step of a loss curve."""

    step: int
    epoch: int
    total: float
    l1: float
    chroma: float
    sobel: float
    lr: float


class MetricRow(BaseModel):
    """Scores of one image; metrics not computed stay ``None``."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    id: str
    ssim: float | None = None
    psnr: float | None = None
    nrmse: float | None = None
    uciqe: float | None = None
    uiqm: float | None = None


class MetricReport(BaseModel):
    """Per-image scores plus the mean of every metric that is present."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    created_at: str = Field(default_factory=_now)
    rows: list[MetricRow] = Field(default_factory=list)
    aggregate: dict[str, float] = Field(default_factory=dict)
    counts: dict[str, int] = Field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows: list[MetricRow]) -> "MetricReport":
        aggregate: dict[str, float] = {}
        counts: dict[str, int] = {"images": len(rows)}
        for column in METRIC_COLUMNS:
            values = [getattr(r, column) for r in rows if getattr(r, column) is not None]
            counts[column] = len(values)
            if values:
                aggregate[column] = sum(values) / len(values)
        return cls(rows=rows, aggregate=aggregate, counts=counts)


class TrainSummary(BaseModel):
    """Outcome of one training run."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    created_at: str = Field(default_factory=_now)
    variant: VariantName
    epochs_run: int
    global_step: int
    best_epoch: int | None = None
    best_val_psnr: float | None = None
    final_train_loss: float | None = None


class VariantSummary(BaseModel):
    """One row of the ablation table."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    variant: VariantName
    crb: bool
    cfb: bool
    l_chroma: bool
    l_sobel: bool
    change: str = ""
    ssim: float
    psnr: float
    initial_loss: float
    final_loss: float


class AblationReport(BaseModel):
    """All rows of one ablation run."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    created_at: str = Field(default_factory=_now)
    seed: int
    rows: list[VariantSummary] = Field(default_factory=list)
