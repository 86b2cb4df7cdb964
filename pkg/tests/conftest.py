"""Shared pytest fixtures."""

from pathlib import Path

import numpy as np
import pytest
import torch

from waterformer import image_io
from waterformer.data import build_synthetic_corpus
from waterformer.models import DatasetManifest


@pytest.fixture(autouse=True)
def temp_runs_dir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Redirect WATERFORMER_RUNS to a temp directory and pin the RNGs for every test."""
    runs = tmp_path / "runs"
    monkeypatch.setenv("WATERFORMER_RUNS", str(runs))
    torch.manual_seed(0)
    torch.set_num_threads(1)
    return runs


# ── Images ────────────────────────────────────────────────────────────────────


def textured_scene(seed: int, size: int = 64) -> torch.Tensor:
    """Smooth colour gradients plus a few bright blobs and stripes, 3×size×size in [0, 1]."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    img = np.empty((3, size, size))
    for c in range(3):
        a, b, phase = rng.uniform(0.2, 0.8, size=3)
        img[c] = 0.5 + 0.25 * np.sin(2 * np.pi * (a * xx + b * yy) * 2 + phase * 6)
    for _ in range(3):
        cy, cx = rng.uniform(0.2, 0.8, size=2)
        blob = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / 0.01))
        img += blob[None] * rng.uniform(-0.3, 0.3, size=(3, 1, 1))
    return torch.from_numpy(np.clip(img, 0.0, 1.0)).float()


def write_scenes(directory: Path, count: int, size: int = 64) -> list[Path]:
    paths = []
    for i in range(count):
        path = directory / f"scene{i:02d}.png"
        image_io.write_png(path, textured_scene(i, size))
        paths.append(path)
    return paths


@pytest.fixture
def clean_dir(tmp_path: Path) -> Path:
    directory = tmp_path / "clean"
    write_scenes(directory, 10)
    return directory


@pytest.fixture
def corpus(clean_dir: Path, tmp_path: Path) -> DatasetManifest:
    """10 scenes × 2 water types, 32×32, split 8/1/1 by scene."""
    return build_synthetic_corpus(clean_dir, tmp_path / "corpus", ["I", "3"], seed=0, size=32)
