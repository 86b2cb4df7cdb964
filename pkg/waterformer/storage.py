"""File storage utilities: run records, YAML configs, manifests and tables."""

import csv
import os
from pathlib import Path
from typing import Iterable, Sequence, Type, TypeVar

import yaml
from pydantic import BaseModel, ValidationError

from .errors import ConfigurationError, IngestionError
from .models import DatasetManifest, ManifestEntry

T = TypeVar("T", bound=BaseModel)

MANIFEST_HEADER = "# waterformer manifest"


def _runs_dir() -> Path:
    """Return the configured runs directory (reads WATERFORMER_RUNS at call time)."""
    return Path(os.getenv("WATERFORMER_RUNS", "runs"))


# ── Run records ───────────────────────────────────────────────────────────────


def save_record(kind: str, name: str, data: BaseModel) -> Path:
    """Serialise a Pydantic model to JSON under the runs directory.

    Args:
        kind: Subdirectory name ("reports", "ablations", "training").
        name: Filename stem.
        data: Pydantic model instance to persist.

    Returns:
        Path of the written file.
    """
    path = _runs_dir() / kind / f"{name}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(data.model_dump_json(indent=2))
    return path


def load_record(kind: str, name: str, model: Type[T]) -> T | None:
    """Load and validate one record, or ``None`` if it does not exist."""
    path = _runs_dir() / kind / f"{name}.json"
    if not path.exists():
        return None
    return model.model_validate_json(path.read_text())


def list_records(kind: str, model: Type[T]) -> list[T]:
    """Return all valid records of a kind, newest first.

    Silently skips files that fail validation (e.g. interrupted writes).
    """
    path = _runs_dir() / kind
    if not path.exists():
        return []
    items: list[T] = []
    for file in sorted(path.glob("*.json"), key=lambda f: f.stat().st_mtime, reverse=True):
        try:
            items.append(model.model_validate_json(file.read_text()))
        except ValidationError:
            pass
    return items


# ── Config files ──────────────────────────────────────────────────────────────


def load_config(path: Path, model: Type[T]) -> T:
    """Read a YAML key-value file into a validated config model.

    Raises:
        IngestionError: The file is missing or not valid YAML.
        ConfigurationError: The values do not validate.
    """
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as exc:
        raise IngestionError(f"Cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise IngestionError(f"Config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"Config file {path} must hold a mapping, got {type(raw).__name__}")
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        raise ConfigurationError(f"Invalid config in {path}:\n{exc}") from exc


def save_config(path: Path, data: BaseModel) -> None:
    """Write a config model as YAML (round-trips through ``load_config``)."""
    Path(path).write_text(yaml.safe_dump(data.model_dump(mode="json"), sort_keys=False))


# ── Manifests ─────────────────────────────────────────────────────────────────


def write_manifest(manifest: DatasetManifest, path: Path) -> None:
    """Write one ``degraded,reference,split`` line per entry."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"{MANIFEST_HEADER} seed={manifest.seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        for entry in manifest.entries:
            writer.writerow([entry.degraded, entry.reference, entry.split])


def read_manifest(path: Path) -> DatasetManifest:
    """Parse a manifest written by ``write_manifest``.

    Raises:
        IngestionError: Missing file, malformed line, or overlapping splits.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"Manifest not found: {path}")
    seed = 0
    entries: list[ManifestEntry] = []
    with path.open(encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if row[0].startswith("#"):
                for token in ",".join(row).split():
                    if token.startswith("seed="):
                        seed = int(token.removeprefix("seed="))
                continue
            if len(row) != 3:
                raise IngestionError(f"{path}:{lineno}: expected 'degraded,reference,split', got {row}")
            try:
                entries.append(ManifestEntry(degraded=row[0], reference=row[1], split=row[2]))
            except ValidationError as exc:
                raise IngestionError(f"{path}:{lineno}: {exc}") from exc
    try:
        return DatasetManifest(root=path.parent, seed=seed, entries=entries)
    except ValidationError as exc:
        raise IngestionError(f"Invalid manifest {path}: {exc}") from exc


# ── Tables ────────────────────────────────────────────────────────────────────


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    """Write a comma-separated table with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
