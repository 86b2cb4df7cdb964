"""Tests for pair loading, augmentation, epoch ordering and synthetic corpora."""

from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from tests.conftest import textured_scene
from waterformer import image_io, storage
from waterformer.data import (
    MANIFEST_NAME,
    Augmentation,
    EpochSampler,
    PairedDataset,
    PairedSample,
    apply_augmentation,
    augment,
    build_synthetic_corpus,
    load_pair,
    load_params,
)
from waterformer.errors import ConfigurationError, DimensionError, IngestionError
from waterformer.models import DatasetManifest, ManifestEntry
from waterformer.physics import recover_analytic

# ── Image files ───────────────────────────────────────────────────────────────


def test_uint8_endpoints_map_to_unit_range() -> None:
    pixels = np.array([[[0, 255, 128]]], dtype=np.uint8)
    image = image_io.from_uint8(pixels)
    assert image.shape == (3, 1, 1)
    assert image[0].item() == 0.0 and image[1].item() == 1.0


def test_png_round_trip_is_lossless(tmp_path: Path) -> None:
    pixels = np.random.default_rng(0).integers(0, 256, size=(9, 7, 3), dtype=np.uint8)
    image_io.write_png(tmp_path / "a.png", image_io.from_uint8(pixels))
    assert np.array_equal(image_io.to_uint8(image_io.read_image(tmp_path / "a.png")), pixels)


def test_read_rejects_non_image(tmp_path: Path) -> None:
    path = tmp_path / "notes.png"
    path.write_text("not an image")
    with pytest.raises(IngestionError, match="neither PNG nor JPEG"):
        image_io.read_image(path)


def test_read_rejects_missing_file(tmp_path: Path) -> None:
    with pytest.raises(IngestionError, match="missing.png"):
        image_io.read_image(tmp_path / "missing.png")


def test_read_accepts_jpeg(tmp_path: Path) -> None:
    Image.new("RGB", (12, 10), (200, 30, 40)).save(tmp_path / "a.jpg", format="JPEG")
    assert image_io.read_image(tmp_path / "a.jpg").shape == (3, 10, 12)


def test_resize_to_same_size_is_identity() -> None:
    image = textured_scene(0, 16)
    assert torch.equal(image_io.resize_image(image, (16, 16)), image)


def test_resize_to_training_size() -> None:
    image = torch.rand(3, 384, 512)
    assert image_io.resize_image(image, (64, 64)).shape == (3, 64, 64)


def test_list_images_filters_and_sorts(tmp_path: Path) -> None:
    for name in ("b.png", "a.jpg", "notes.txt"):
        (tmp_path / name).write_bytes(b"")
    assert [p.name for p in image_io.list_images(tmp_path)] == ["a.jpg", "b.png"]


# ── Pairs ─────────────────────────────────────────────────────────────────────


def _write_pair(root: Path, name: str, size: tuple[int, int], ref_size: tuple[int, int] | None = None) -> ManifestEntry:
    image_io.write_png(root / "degraded" / f"{name}.png", torch.rand(3, *size))
    image_io.write_png(root / "reference" / f"{name}.png", torch.rand(3, *(ref_size or size)))
    return ManifestEntry(degraded=f"degraded/{name}.png", reference=f"reference/{name}.png", split="train")


def test_load_pair_resizes_both_images(tmp_path: Path) -> None:
    entry = _write_pair(tmp_path, "p", (384, 512))
    sample = load_pair(entry, tmp_path, size=64)
    assert sample.degraded.shape == sample.reference.shape == (3, 64, 64)
    assert sample.id == "p"


def test_load_pair_without_resize_rejects_mismatch(tmp_path: Path) -> None:
    entry = _write_pair(tmp_path, "p", (16, 16), ref_size=(16, 20))
    with pytest.raises(DimensionError):
        load_pair(entry, tmp_path, size=None)


def test_load_pair_names_missing_file(tmp_path: Path) -> None:
    entry = ManifestEntry(degraded="degraded/x.png", reference="reference/x.png", split="train")
    with pytest.raises(IngestionError, match="x.png"):
        load_pair(entry, tmp_path)


# ── Augmentation ──────────────────────────────────────────────────────────────


def _sample() -> PairedSample:
    degraded = torch.rand(3, 6, 6)
    return PairedSample(degraded=degraded, reference=degraded * 0.5, id="s")


def test_identity_augmentation_is_a_no_op() -> None:
    sample = _sample()
    out = apply_augmentation(sample, Augmentation())
    assert torch.equal(out.degraded, sample.degraded) and torch.equal(out.reference, sample.reference)


def test_same_seed_gives_same_augmentation() -> None:
    sample = _sample()
    first = augment(sample, np.random.default_rng(5))
    second = augment(sample, np.random.default_rng(5))
    assert torch.equal(first.degraded, second.degraded)


def test_both_images_get_the_same_transform() -> None:
    degraded = torch.zeros(3, 6, 6)
    degraded[:, 1, 4] = 1.0
    sample = PairedSample(degraded=degraded, reference=degraded.clone(), id="m")
    for seed in range(8):
        out = augment(sample, np.random.default_rng(seed))
        assert torch.equal(out.degraded, out.reference)


def test_augmentation_permutes_pixels() -> None:
    sample = _sample()
    out = apply_augmentation(sample, Augmentation(hflip=True, vflip=True, quarter_turns=3))
    assert torch.equal(out.degraded.flatten().sort().values, sample.degraded.flatten().sort().values)


# ── Epoch ordering ────────────────────────────────────────────────────────────


def test_epoch_order_is_a_function_of_seed_and_epoch() -> None:
    a, b = EpochSampler(20, seed=3), EpochSampler(20, seed=3)
    assert a.order(4) == b.order(4)
    assert sorted(a.order(4)) == list(range(20))
    assert a.order(4) != a.order(5)


def test_sampler_follows_set_epoch() -> None:
    sampler = EpochSampler(10, seed=1)
    sampler.set_epoch(2)
    assert list(sampler) == sampler.order(2)


def test_loader_workers_do_not_change_batches(corpus: DatasetManifest) -> None:
    from torch.utils.data import DataLoader

    dataset = PairedDataset(corpus.split("train"), corpus.root, 32, augment=True, seed=0)
    dataset.set_epoch(1)
    serial = [b[0] for b in DataLoader(dataset, batch_size=4, sampler=dataset.sampler)]
    pooled = [b[0] for b in DataLoader(dataset, batch_size=4, sampler=dataset.sampler, num_workers=2)]
    assert all(torch.equal(x, y) for x, y in zip(serial, pooled, strict=True))


# ── Synthetic corpora ─────────────────────────────────────────────────────────


def test_corpus_counts_and_splits(corpus: DatasetManifest) -> None:
    assert len(corpus.entries) == 20
    assert [len(corpus.split(s)) for s in ("train", "val", "test")] == [16, 2, 2]


def test_corpus_splits_are_disjoint_by_scene(corpus: DatasetManifest) -> None:
    scenes = {s: {e.id.rsplit("-", 1)[0] for e in corpus.split(s)} for s in ("train", "val", "test")}
    assert not scenes["train"] & scenes["val"]
    assert not scenes["train"] & scenes["test"]
    assert not scenes["val"] & scenes["test"]


def test_corpus_writes_manifest(corpus: DatasetManifest) -> None:
    loaded = storage.read_manifest(corpus.root / MANIFEST_NAME)
    assert loaded.entries == corpus.entries
    assert loaded.seed == 0


def test_same_seed_gives_same_manifest(clean_dir: Path, tmp_path: Path) -> None:
    first = build_synthetic_corpus(clean_dir, tmp_path / "a", ["IB"], seed=4, size=16)
    second = build_synthetic_corpus(clean_dir, tmp_path / "b", ["IB"], seed=4, size=16)
    assert (tmp_path / "a" / MANIFEST_NAME).read_text() == (tmp_path / "b" / MANIFEST_NAME).read_text()
    assert first.entries == second.entries


def test_stored_params_invert_the_pair(clean_dir: Path, tmp_path: Path) -> None:
    manifest = build_synthetic_corpus(clean_dir, tmp_path / "shallow", ["I", "5"], depth_range=(0.1, 0.5), size=16)
    for entry in manifest.entries:
        params, degraded, reference = load_params(manifest.root / "params" / f"{entry.id}.npz")
        assert float(params.transmission.min()) >= 0.1
        assert float((recover_analytic(degraded, params) - reference).abs().max()) <= 1e-6


def test_count_cycles_sources(clean_dir: Path, tmp_path: Path) -> None:
    manifest = build_synthetic_corpus(clean_dir, tmp_path / "c", ["1"], count=12, size=16)
    assert len(manifest.entries) == 12
    assert manifest.entries[10].id == "0010-scene00-1"


def test_empty_clean_dir_is_an_ingestion_error(tmp_path: Path) -> None:
    (tmp_path / "empty").mkdir()
    with pytest.raises(IngestionError):
        build_synthetic_corpus(tmp_path / "empty", tmp_path / "out", ["I"])


def test_unknown_type_is_rejected_before_writing(clean_dir: Path, tmp_path: Path) -> None:
    with pytest.raises(ConfigurationError):
        build_synthetic_corpus(clean_dir, tmp_path / "out", ["I", "XI"])
    assert not (tmp_path / "out").exists()
