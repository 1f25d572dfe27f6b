"""Daytime smoke-pixel counting and event segmentation.

The detector is a temporal-median background subtractor with a color gate
tuned for light plumes: a pixel counts as smoke when it moved against the
recent background, is nearly unsaturated, and is bright. Contiguous runs of
frames whose counts stay above a threshold become events, each of which
carries an algorithm-origin thumbnail spec pointing at the emitting region.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .storage import DataStore
from .thumbnails import ThumbnailSpec, encode_url
from .timelapse import Dataset, iter_frame_images, load_dataset

EVENT_THUMB_SIZE = (320, 240)
EVENT_THUMB_FPS = 12
EVENT_THUMB_MAX_FRAMES = 240
_CC_STRUCTURE = np.ones((3, 3), dtype=bool)  # 8-connectivity


@dataclass(frozen=True)
class SmokeParams:
    bg_window: int = 60
    diff_threshold: float = 20.0
    max_saturation: float = 0.25
    min_value: float = 0.5
    min_component_area: int = 64
    daytime_luminance: float = 50.0
    event_threshold: int = 500
    min_event_frames: int = 3
    merge_gap: int = 12

    def validate(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValidationError(f"smoke parameter {f.name} must be positive")
        if not 0 < self.max_saturation <= 1:
            raise ValidationError("max_saturation must be in (0, 1]")
        if not 0 < self.min_value <= 1:
            raise ValidationError("min_value must be in (0, 1]")

    @classmethod
    def from_file(cls, path: Path) -> "SmokeParams":
        """Flat key=value file, one parameter per line, '#' comments allowed."""
        values: dict[str, object] = {}
        known = {f.name: f.type for f in fields(cls)}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not eq or key not in known:
                raise ValidationError(f"{path}:{lineno}: unknown smoke parameter line {raw!r}")
            try:
                values[key] = int(value) if known[key] == "int" else float(value)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
        params = cls(**values)
        params.validate()
        return params


@dataclass(frozen=True)
class SmokeFrameResult:
    frame_index: int
    smoke_pixel_count: int
    is_daytime: bool
    component_boxes: tuple[tuple[int, int, int, int], ...] = ()  # (l, t, r, b), exclusive r/b


@dataclass(frozen=True)
class SmokeEvent:
    start_frame: int
    end_frame: int  # inclusive
    peak_count: int
    bounds: tuple[int, int, int, int]
    thumbnail: ThumbnailSpec

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1


def mean_luminance(frame: np.ndarray) -> float:
    """Mean over pixels of (R+G+B)/3 on the 0..255 scale."""
    return float(frame.mean())


def _smoke_mask(frame: np.ndarray, background: np.ndarray, params: SmokeParams) -> np.ndarray:
    diff = np.abs(frame.astype(np.int16) - background.astype(np.int16)).max(axis=2)
    moved = diff > params.diff_threshold
    channel_max = frame.max(axis=2).astype(np.float32)
    channel_min = frame.min(axis=2).astype(np.float32)
    value = channel_max / 255.0
    with np.errstate(invalid="ignore", divide="ignore"):
        saturation = np.where(channel_max > 0, (channel_max - channel_min) / channel_max, 0.0)
    return moved & (saturation < params.max_saturation) & (value > params.min_value)


def _accepted_components(mask: np.ndarray, min_area: int):
    labels, count = ndimage.label(mask, structure=_CC_STRUCTURE)
    if count == 0:
        return 0, ()
    areas = np.bincount(labels.ravel())[1:]
    boxes = []
    total = 0
    for label_id, sl in enumerate(ndimage.find_objects(labels), start=1):
        area = int(areas[label_id - 1])
        if area >= min_area:
            total += area
            boxes.append((sl[1].start, sl[0].start, sl[1].stop, sl[0].stop))
    return total, tuple(boxes)


def detect_frames(frames: Iterable[np.ndarray], params: SmokeParams) -> list[SmokeFrameResult]:
    """Per-frame smoke-pixel counts over a stream of (H, W, 3) uint8 frames.

    The background for frame k is the per-pixel, per-channel temporal median
    of the preceding ``bg_window`` original frames (frame 0 falls back to
    itself). Non-daytime frames short-circuit to a zero count but still feed
    the background window.
    """
    params.validate()
    window: deque[np.ndarray] = deque(maxlen=params.bg_window)
    results: list[SmokeFrameResult] = []
    for k, frame in enumerate(frames):
        frame = np.asarray(frame, dtype=np.uint8)
        if mean_luminance(frame) <= params.daytime_luminance:
            results.append(SmokeFrameResult(k, 0, False, ()))
        else:
            history = window if window else [frame]
            background = np.median(np.stack(history), axis=0).astype(np.uint8)
            mask = _smoke_mask(frame, background, params)
            count, boxes = _accepted_components(mask, params.min_component_area)
            results.append(SmokeFrameResult(k, count, True, boxes))
        window.append(frame)
    if not results:
        raise ValidationError("dataset has no frames to detect on")
    return results


def _threshold_runs(counts: Sequence[int], threshold: int) -> list[list[int]]:
    runs: list[list[int]] = []
    start = None
    for i, c in enumerate(counts):
        if c >= threshold:
            if start is None:
                start = i
        elif start is not None:
            runs.append([start, i - 1])
            start = None
    if start is not None:
        runs.append([start, len(counts) - 1])
    return runs


def segment_events(
    results: Sequence[SmokeFrameResult], dataset: Dataset, params: SmokeParams
) -> list[SmokeEvent]:
    """Segment per-frame counts into events.

    Maximal runs with count >= event_threshold are found first; runs whose
    separating gap is shorter than merge_gap frames are merged; merged runs
    shorter than min_event_frames are dropped. Results must cover contiguous
    frame indices.
    """
    if not results:
        return []
    base = results[0].frame_index
    for offset, r in enumerate(results):
        if r.frame_index != base + offset:
            raise ValidationError("detection results must cover contiguous frames")

    counts = [r.smoke_pixel_count for r in results]
    runs = _threshold_runs(counts, params.event_threshold)
    merged: list[list[int]] = []
    for run in runs:
        if merged and run[0] - merged[-1][1] - 1 < params.merge_gap:
            merged[-1][1] = run[1]
        else:
            merged.append(run)

    events = []
    for lo, hi in merged:
        if hi - lo + 1 < params.min_event_frames:
            continue
        events.append(_build_event(results, lo, hi, base, dataset))
    return events


def _build_event(results, lo, hi, base, dataset: Dataset) -> SmokeEvent:
    peak = max(r.smoke_pixel_count for r in results[lo:hi + 1])
    boxes = [b for r in results[lo:hi + 1] for b in r.component_boxes]
    if boxes:
        left = min(b[0] for b in boxes)
        top = min(b[1] for b in boxes)
        right = max(b[2] for b in boxes)
        bottom = max(b[3] for b in boxes)
    else:
        left, top, right, bottom = 0, 0, dataset.frame_width, dataset.frame_height
    pad_x = int(round(0.1 * (right - left)))
    pad_y = int(round(0.1 * (bottom - top)))
    left = max(left - pad_x, 0)
    top = max(top - pad_y, 0)
    right = min(right + pad_x, dataset.frame_width)
    bottom = min(bottom + pad_y, dataset.frame_height)

    start = base + lo
    length = hi - lo + 1
    thumb = ThumbnailSpec(
        dataset_id=dataset.id,
        bounds=(left, top, right, bottom),
        out_width=EVENT_THUMB_SIZE[0],
        out_height=EVENT_THUMB_SIZE[1],
        start_frame=start,
        nframes=min(length, EVENT_THUMB_MAX_FRAMES),
        fps=EVENT_THUMB_FPS,
        format="gif",
        origin="algorithm",
    )
    thumb.validate(dataset)
    return SmokeEvent(
        start_frame=start,
        end_frame=base + hi,
        peak_count=peak,
        bounds=(left, top, right, bottom),
        thumbnail=thumb,
    )


# --- persistence -------------------------------------------------------------


def persist_detection(
    store: DataStore, dataset_id: str,
    results: Sequence[SmokeFrameResult], events: Sequence[SmokeEvent],
) -> None:
    with store.smoke_frames_csv(dataset_id).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "smoke_pixel_count", "is_daytime"])
        for r in results:
            writer.writerow([r.frame_index, r.smoke_pixel_count, str(r.is_daytime).lower()])
    payload = [
        {
            "start_frame": e.start_frame,
            "end_frame": e.end_frame,
            "peak_count": e.peak_count,
            "bounds": list(e.bounds),
            "thumbnail": e.thumbnail.to_json(),
            "url": encode_url(e.thumbnail),
        }
        for e in events
    ]
    store.smoke_events_json(dataset_id).write_text(json.dumps(payload))


def load_frame_results(store: DataStore, dataset_id: str) -> list[SmokeFrameResult]:
    """Persisted per-frame counts; empty when detection never ran."""
    path = store.smoke_frames_csv(dataset_id)
    if not path.is_file():
        return []
    results = []
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            results.append(
                SmokeFrameResult(
                    frame_index=int(row["frame_index"]),
                    smoke_pixel_count=int(row["smoke_pixel_count"]),
                    is_daytime=row["is_daytime"] == "true",
                )
            )
    return results


def load_events(store: DataStore, dataset_id: str) -> list[SmokeEvent]:
    path = store.smoke_events_json(dataset_id)
    if not path.is_file():
        return []
    events = []
    for item in json.loads(path.read_text()):
        events.append(
            SmokeEvent(
                start_frame=int(item["start_frame"]),
                end_frame=int(item["end_frame"]),
                peak_count=int(item["peak_count"]),
                bounds=tuple(item["bounds"]),
                thumbnail=ThumbnailSpec.from_json(item["thumbnail"]),
            )
        )
    return events


def list_event_thumbnails(store: DataStore, dataset_id: str) -> list[tuple[str, SmokeEvent]]:
    """(url, event) pairs ordered by start frame; [] when never detected."""
    events = sorted(load_events(store, dataset_id), key=lambda e: e.start_frame)
    return [(encode_url(e.thumbnail), e) for e in events]


def run_detection(
    store: DataStore, dataset_id: str, params: SmokeParams | None = None
) -> tuple[list[SmokeFrameResult], list[SmokeEvent]]:
    """Detect + segment + persist for one dataset (exclusive per dataset)."""
    params = params or SmokeParams()
    params.validate()
    dataset = load_dataset(store, dataset_id)
    if dataset.frame_count == 0:
        raise ValidationError(f"dataset {dataset_id!r} has no frames")
    if params.bg_window >= dataset.frame_count:
        raise ValidationError(
            f"bg_window {params.bg_window} must be smaller than the "
            f"frame count {dataset.frame_count}"
        )
    results = detect_frames(iter_frame_images(store, dataset), params)
    events = segment_events(results, dataset, params)
    persist_detection(store, dataset_id, results, events)
    return results, events
