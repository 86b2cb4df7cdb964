"""Paired-data ingestion, augmentation, epoch ordering and synthetic corpora."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import torch
from torch.utils.data import Dataset, Sampler
from tqdm import tqdm

from . import image_io, storage
from .errors import ConfigurationError, DimensionError, IngestionError
from .image_io import Interpolation
from .models import DatasetManifest, ManifestEntry, SplitName
from .physics import DegradationParams, degrade, make_water_type

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.csv"


# ── Samples ───────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class PairedSample:
    degraded: torch.Tensor
    reference: torch.Tensor
    id: str


def load_pair(
    entry: ManifestEntry,
    root: Path,
    size: int | None = 64,
    interpolation: Interpolation = "bilinear",
) -> PairedSample:
    """Decode both images of an entry and resize them to ``size×size``.

    Raises:
        IngestionError: A file is missing or does not decode.
        DimensionError: ``size`` is None and the two images differ in size.
    """
    root = Path(root)
    degraded = image_io.read_image(root / entry.degraded)
    reference = image_io.read_image(root / entry.reference)
    if size is not None:
        degraded = image_io.resize_image(degraded, (size, size), interpolation)
        reference = image_io.resize_image(reference, (size, size), interpolation)
    elif degraded.shape != reference.shape:
        raise DimensionError(
            f"pair {entry.id}: degraded {tuple(degraded.shape)} and reference {tuple(reference.shape)} differ"
        )
    return PairedSample(degraded=degraded, reference=reference, id=entry.id)


# ── Augmentation ──────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Augmentation:
    """Lossless paired transform: optional flips then ``quarter_turns``·90°."""

    hflip: bool = False
    vflip: bool = False
    quarter_turns: int = 0


def draw_augmentation(rng: np.random.Generator) -> Augmentation:
    return Augmentation(
        hflip=bool(rng.random() < 0.5),
        vflip=bool(rng.random() < 0.5),
        quarter_turns=int(rng.integers(0, 4)),
    )


def _transform(img: torch.Tensor, aug: Augmentation) -> torch.Tensor:
    if aug.hflip:
        img = img.flip(-1)
    if aug.vflip:
        img = img.flip(-2)
    if aug.quarter_turns:
        img = torch.rot90(img, aug.quarter_turns, dims=(-2, -1))
    return img.contiguous()


def apply_augmentation(sample: PairedSample, aug: Augmentation) -> PairedSample:
    return PairedSample(_transform(sample.degraded, aug), _transform(sample.reference, aug), sample.id)


def augment(sample: PairedSample, rng: np.random.Generator) -> PairedSample:
    """Apply one random transform, identically to both images."""
    return apply_augmentation(sample, draw_augmentation(rng))


# ── Epoch ordering ────────────────────────────────────────────────────────────


class EpochSampler(Sampler[int]):
    """Sample order and augmentation as pure functions of (seed, epoch, index)."""

    def __init__(self, size: int, seed: int = 0) -> None:
        self.size = size
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def order(self, epoch: int) -> list[int]:
        return [int(i) for i in np.random.default_rng([self.seed, epoch]).permutation(self.size)]

    def augmentation(self, epoch: int, index: int) -> Augmentation:
        return draw_augmentation(np.random.default_rng([self.seed, epoch, index]))

    def __iter__(self) -> Iterator[int]:
        return iter(self.order(self.epoch))

    def __len__(self) -> int:
        return self.size


class PairedDataset(Dataset):
    """Pairs of one split, resized once and cached, augmented per epoch.

    Items are ``(degraded, reference)`` tensors so the default collate stacks
    them into batches. Samples depend only on (seed, epoch, index), so a
    multi-worker loader yields the same batches as a single-threaded one.
    """

    def __init__(
        self,
        entries: Sequence[ManifestEntry],
        root: Path,
        size: int | None = 64,
        interpolation: Interpolation = "bilinear",
        augment: bool = False,
        seed: int = 0,
    ) -> None:
        self.entries = list(entries)
        self.root = Path(root)
        self.size = size
        self.interpolation = interpolation
        self.augment = augment
        self.sampler = EpochSampler(len(self.entries), seed)
        self._cache: dict[int, PairedSample] = {}

    def set_epoch(self, epoch: int) -> None:
        self.sampler.set_epoch(epoch)

    def sample(self, index: int) -> PairedSample:
        if index not in self._cache:
            self._cache[index] = load_pair(self.entries[index], self.root, self.size, self.interpolation)
        sample = self._cache[index]
        if self.augment:
            sample = apply_augmentation(sample, self.sampler.augmentation(self.sampler.epoch, index))
        return sample

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> tuple[torch.Tensor, torch.Tensor]:
        sample = self.sample(index)
        return sample.degraded, sample.reference


# ── Synthetic corpora ─────────────────────────────────────────────────────────


def _split_sizes(n: int) -> tuple[int, int, int]:
    """80/10/10 split of ``n`` sources; tiny corpora keep everything in train."""
    if n < 3:
        return n, 0, 0
    n_val = max(1, math.floor(0.1 * n))
    n_test = max(1, math.floor(0.1 * n))
    return n - n_val - n_test, n_val, n_test


def _assign_splits(n: int, rng: np.random.Generator) -> list[SplitName]:
    n_train, n_val, _ = _split_sizes(n)
    splits: list[SplitName] = ["train"] * n
    for rank, source in enumerate(rng.permutation(n)):
        if rank >= n_train + n_val:
            splits[source] = "test"
        elif rank >= n_train:
            splits[source] = "val"
    return splits


def _sample_depth(rng: np.random.Generator, depth_range: tuple[float, float], size: int) -> torch.Tensor:
    """Constant depth, or a vertical gradient between two sampled depths."""
    lo, hi = depth_range
    if rng.random() < 0.5:
        return torch.tensor(float(rng.uniform(lo, hi)), dtype=torch.float64)
    top, bottom = sorted(float(d) for d in rng.uniform(lo, hi, size=2))
    column = torch.linspace(top, bottom, size, dtype=torch.float64)
    return column[:, None].expand(size, size).contiguous()


def _save_params(path: Path, params: DegradationParams, degraded_raw: torch.Tensor, reference: torch.Tensor) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        path,
        transmission=params.transmission.numpy(),
        background_light=params.background_light.numpy(),
        degraded=degraded_raw.numpy(),
        reference=reference.numpy(),
    )


def load_params(path: Path) -> tuple[DegradationParams, torch.Tensor, torch.Tensor]:
    """Read a synthetic pair's side file: params, float degraded, float reference."""
    try:
        with np.load(Path(path)) as data:
            params = DegradationParams(
                background_light=torch.from_numpy(data["background_light"]),
                transmission=torch.from_numpy(data["transmission"]),
            )
            return params, torch.from_numpy(data["degraded"]), torch.from_numpy(data["reference"])
    except (OSError, KeyError, ValueError) as exc:
        raise IngestionError(f"Cannot read parameter file {path}: {exc}") from exc


def build_synthetic_corpus(
    clean_dir: Path,
    out_dir: Path,
    types: Sequence[str],
    depth_range: tuple[float, float] = (1.0, 5.0),
    count: int | None = None,
    seed: int = 0,
    size: int = 64,
) -> DatasetManifest:
    """Degrade ``count`` clean scenes once per water type and write a manifest.

    Sources are taken from ``clean_dir`` in name order (cycling if ``count``
    exceeds them) and split 80/10/10 by source, so every type of one scene
    lands in the same split. Each pair gets ``degraded/<id>.png``,
    ``reference/<id>.png`` and ``params/<id>.npz`` with the true transmission,
    background light and unquantised images.

    Raises:
        IngestionError: ``clean_dir`` holds no images.
        ConfigurationError: An unknown water type or an invalid depth range.
    """
    clean_dir, out_dir = Path(clean_dir), Path(out_dir)
    files = image_io.list_images(clean_dir)
    if not files:
        raise IngestionError(f"No PNG/JPEG images in {clean_dir}")
    lo, hi = depth_range
    if not 0 <= lo <= hi:
        raise ConfigurationError(f"depth range must satisfy 0 <= min <= max, got {depth_range}")
    n = count if count is not None else len(files)
    for type_id in types:
        make_water_type(type_id, 0.0)

    rng = np.random.default_rng(seed)
    splits = _assign_splits(n, rng)
    entries: list[ManifestEntry] = []
    for index in tqdm(range(n), desc="synthesize", unit="scene", disable=None):
        source = files[index % len(files)]
        clean = image_io.resize_image(image_io.read_image(source), (size, size))
        for type_id in types:
            pair_id = f"{index:04d}-{source.stem}-{type_id}"
            params = make_water_type(type_id, _sample_depth(rng, depth_range, size), size=(size, size))
            degraded = degrade(clean.to(torch.float64), params)
            image_io.write_png(out_dir / "degraded" / f"{pair_id}.png", degraded.image)
            image_io.write_png(out_dir / "reference" / f"{pair_id}.png", clean)
            _save_params(out_dir / "params" / f"{pair_id}.npz", params, degraded.image, clean.to(torch.float64))
            entries.append(
                ManifestEntry(
                    degraded=f"degraded/{pair_id}.png",
                    reference=f"reference/{pair_id}.png",
                    split=splits[index],
                )
            )

    manifest = DatasetManifest(root=out_dir, seed=seed, entries=entries)
    storage.write_manifest(manifest, out_dir / MANIFEST_NAME)
    logger.info(
        "wrote %d pairs to %s (train %d, val %d, test %d)",
        len(entries),
        out_dir,
        len(manifest.split("train")),
        len(manifest.split("val")),
        len(manifest.split("test")),
    )
    return manifest
