"""On-disk layout of a plumewatch data root.

Everything the service persists lives under one directory:

    <root>/
      datasets/<id>/frames/<YYYYMMDDTHHMMSSZ>.jpg   source imagery
      datasets/<id>/dataset.json                    frame manifest
      datasets/<id>/tiles/<level>/<row>_<col>/<segment>.bin
      datasets/<id>/tiles/pyramid.json
      datasets/<id>/smoke_frames.csv                per-frame detection output
      datasets/<id>/smoke_events.json               segmented events
      telemetry.db                                  sqlite (readings/wind/smell)
      stations.csv                                  optional station registry
      access.log                                    default service log location
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$")


def validate_dataset_id(dataset_id: str) -> str:
    """Dataset ids appear in paths and URLs, so keep them to a safe token."""
    if not _ID_RE.match(dataset_id):
        raise ValidationError(
            f"invalid dataset id {dataset_id!r}: expected a short token of "
            "letters, digits, '.', '_' or '-'"
        )
    return dataset_id


@dataclass(frozen=True)
class DataStore:
    """Path helper for a data root; creates nothing until asked."""

    root: Path

    def __post_init__(self) -> None:
        object.__setattr__(self, "root", Path(self.root))

    def datasets_dir(self) -> Path:
        return self.root / "datasets"

    def dataset_dir(self, dataset_id: str) -> Path:
        return self.datasets_dir() / validate_dataset_id(dataset_id)

    def frames_dir(self, dataset_id: str) -> Path:
        return self.dataset_dir(dataset_id) / "frames"

    def dataset_manifest(self, dataset_id: str) -> Path:
        return self.dataset_dir(dataset_id) / "dataset.json"

    def tiles_dir(self, dataset_id: str) -> Path:
        return self.dataset_dir(dataset_id) / "tiles"

    def pyramid_manifest(self, dataset_id: str) -> Path:
        return self.tiles_dir(dataset_id) / "pyramid.json"

    def tile_segment(self, dataset_id: str, level: int, row: int, col: int, segment: int) -> Path:
        return self.tiles_dir(dataset_id) / str(level) / f"{row}_{col}" / f"{segment}.bin"

    def smoke_frames_csv(self, dataset_id: str) -> Path:
        return self.dataset_dir(dataset_id) / "smoke_frames.csv"

    def smoke_events_json(self, dataset_id: str) -> Path:
        return self.dataset_dir(dataset_id) / "smoke_events.json"

    def telemetry_db(self) -> Path:
        return self.root / "telemetry.db"

    def stations_csv(self) -> Path:
        return self.root / "stations.csv"

    def default_log_path(self) -> Path:
        return self.root / "access.log"

    def list_datasets(self) -> list[str]:
        base = self.datasets_dir()
        if not base.is_dir():
            return []
        return sorted(p.name for p in base.iterdir() if (p / "dataset.json").is_file())
