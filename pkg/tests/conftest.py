"""Shared fixture builders: synthetic frame directories and datasets."""

from __future__ import annotations

import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

from plumewatch.storage import DataStore
from plumewatch.timelapse import build_pyramid, ingest_frames

T0 = datetime(2015, 8, 3, 12, 0, 0, tzinfo=timezone.utc)


def frame_name(t: datetime, suffix=".png") -> str:
    return t.strftime("%Y%m%dT%H%M%SZ") + suffix


def write_frames(directory: Path, images, start=T0, interval_s=5, suffix=".png"):
    """Write a list of (H, W, 3) arrays as timestamp-named files."""
    directory.mkdir(parents=True, exist_ok=True)
    times = []
    for k, img in enumerate(images):
        t = start + timedelta(seconds=k * interval_s)
        Image.fromarray(np.asarray(img, dtype=np.uint8)).save(
            directory / frame_name(t, suffix)
        )
        times.append(t)
    return times


def gradient_frames(n, width, height, seed=0):
    """Deterministic frames that differ per index (rolled random blocks)."""
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return [np.roll(base, 7 * k, axis=1) for k in range(n)]


def flat_frames(n, width, height, color):
    frame = np.zeros((height, width, 3), dtype=np.uint8)
    frame[:, :] = color
    return [frame.copy() for _ in range(n)]


@pytest.fixture
def store(tmp_path) -> DataStore:
    root = tmp_path / "data"
    root.mkdir()
    return DataStore(root)


@pytest.fixture
def small_dataset(store, tmp_path):
    """6 frames of 40x30 drifting noise, ingested and tiled (tile size 16)."""
    src = tmp_path / "src_small"
    write_frames(src, gradient_frames(6, 40, 30, seed=3))
    dataset = ingest_frames(store, "small", src)
    build_pyramid(store, "small", tile_size=16, segment_len=4)
    return dataset
