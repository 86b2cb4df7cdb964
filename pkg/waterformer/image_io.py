"""Image decoding, encoding and resizing at the file boundary.

Validation applied to every file read:
- Allow-list of formats (PNG, JPEG), checked by magic bytes rather than suffix
- Hard file-size cap
- Decoding errors reported with the offending path
"""

import io
from pathlib import Path
from typing import Literal

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .errors import IngestionError

# ── Configuration ─────────────────────────────────────────────────────────────

IMAGE_SUFFIXES: frozenset[str] = frozenset({".png", ".jpg", ".jpeg"})
MAX_IMAGE_BYTES: int = 64 * 1024 * 1024  # 64 MB

_MAGIC: dict[str, list[bytes]] = {
    "PNG": [b"\x89PNG\r\n\x1a\n"],
    "JPEG": [b"\xff\xd8\xff"],
}

_RESAMPLE = {
    "bilinear": Image.Resampling.BILINEAR,
    "bicubic": Image.Resampling.BICUBIC,
    "nearest": Image.Resampling.NEAREST,
}

Interpolation = Literal["bilinear", "bicubic", "nearest"]


def _sniff_format(data: bytes) -> str | None:
    """Return the allowed format whose magic bytes open ``data``, if any."""
    for fmt, signatures in _MAGIC.items():
        if any(data[: len(sig)] == sig for sig in signatures):
            return fmt
    return None


# ── Reading ───────────────────────────────────────────────────────────────────


def read_image(path: Path) -> torch.Tensor:
    """Decode an 8-bit PNG/JPEG file into a ``3×H×W`` float32 tensor in [0, 1].

    Raises:
        IngestionError: Missing, oversized, unsupported or corrupt file.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IngestionError(f"Cannot read image {path}: {exc}") from exc

    if len(data) > MAX_IMAGE_BYTES:
        raise IngestionError(f"Image {path} exceeds {MAX_IMAGE_BYTES // 1024 // 1024} MB.")
    if _sniff_format(data) is None:
        raise IngestionError(f"Image {path} is neither PNG nor JPEG.")

    try:
        with Image.open(io.BytesIO(data)) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise IngestionError(f"Image {path} could not be decoded: {exc}") from exc

    return from_uint8(rgb)


def list_images(directory: Path) -> list[Path]:
    """Return image files of a directory sorted by name (not recursive)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestionError(f"Not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


# ── Writing ───────────────────────────────────────────────────────────────────


def write_png(path: Path, image: torch.Tensor) -> None:
    """Clamp to [0, 1], round to 8 bits and save losslessly as PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(image)).save(path, format="PNG")


# ── Conversions ───────────────────────────────────────────────────────────────


def from_uint8(pixels: np.ndarray) -> torch.Tensor:
    """``H×W×3`` uint8 array → ``3×H×W`` float32 tensor; 0 → 0.0, 255 → 1.0."""
    return torch.from_numpy(pixels.astype(np.float32) / 255.0).permute(2, 0, 1).contiguous()


def to_uint8(image: torch.Tensor) -> np.ndarray:
    """``3×H×W`` tensor in [0, 1] → ``H×W×3`` uint8 array, round to nearest."""
    arr = image.detach().to(torch.float64).clamp(0.0, 1.0).permute(1, 2, 0).cpu().numpy()
    return np.rint(arr * 255.0).astype(np.uint8)


def to_numpy(image: torch.Tensor) -> np.ndarray:
    """``3×H×W`` tensor → ``H×W×3`` float64 array (the metrics convention)."""
    return image.detach().to(torch.float64).permute(1, 2, 0).cpu().numpy()


def resize_image(image: torch.Tensor, size: tuple[int, int], interpolation: Interpolation = "bilinear") -> torch.Tensor:
    """Resize a ``3×H×W`` image to ``size`` = (height, width).

    Images already at the target size are returned unchanged. Resampling
    runs per channel in 32-bit float so no 8-bit quantisation is added.
    """
    height, width = size
    if tuple(image.shape[-2:]) == (height, width):
        return image
    resample = _RESAMPLE[interpolation]
    channels = [
        np.asarray(Image.fromarray(c.cpu().numpy().astype(np.float32)).resize((width, height), resample))
        for c in image
    ]
    return torch.from_numpy(np.stack(channels)).clamp_(0.0, 1.0)
