"""Timelapse datasets and multi-resolution tile pyramids.

A dataset is a day (or any contiguous run) of fixed-interval frames, ingested
from files named ``<YYYYMMDDTHHMMSSZ>.jpg`` (or ``.png``). The pyramid is a
power-of-two stack: the top level is native resolution and each level below
halves it with a 2x2 box filter, cut into fixed-size tiles padded with black
at the right/bottom edges. Tile clips travel in the PWTC container documented
next to :func:`encode_clip`.
"""

from __future__ import annotations

import bisect
import json
import re
import shutil
import struct
import zlib
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from statistics import median
from typing import Iterator, Sequence

import numpy as np
from PIL import Image

from .errors import NotFoundError, StorageError, ValidationError
from .storage import DataStore, validate_dataset_id

FRAME_SUFFIXES = (".jpg", ".png")
_FILENAME_TIME_FORMAT = "%Y%m%dT%H%M%SZ"
DEFAULT_TILE_SIZE = 512
DEFAULT_SEGMENT_LEN = 1000
DEFAULT_INTERVAL_S = 5.0


_FILENAME_RE = re.compile(r"^\d{8}T\d{6}Z$")


def parse_frame_filename(name: str) -> datetime:
    """Parse ``20150803T000005Z.jpg`` into an aware UTC datetime."""
    stem, dot, suffix = name.partition(".")
    if not dot or "." + suffix.lower() not in FRAME_SUFFIXES:
        raise ValidationError(f"unparsable frame filename {name!r}: expected .jpg or .png")
    if not _FILENAME_RE.match(stem):
        raise ValidationError(
            f"unparsable frame filename {name!r}: expected <YYYYMMDDTHHMMSSZ>.jpg|.png"
        )
    try:
        dt = datetime.strptime(stem, _FILENAME_TIME_FORMAT)
    except ValueError:
        raise ValidationError(
            f"unparsable frame filename {name!r}: expected <YYYYMMDDTHHMMSSZ>.jpg|.png"
        ) from None
    return dt.replace(tzinfo=timezone.utc)


def frame_filename(t: datetime, suffix: str) -> str:
    return t.astimezone(timezone.utc).strftime(_FILENAME_TIME_FORMAT) + suffix


def iso_utc(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_utc(value: str) -> datetime:
    """Lenient ISO-8601 parser; naive inputs are taken as UTC."""
    s = value.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        raise ValidationError(f"unparsable timestamp {value!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass(frozen=True)
class FrameRecord:
    index: int
    capture_time: datetime
    filename: str


@dataclass(frozen=True)
class Dataset:
    """Ingested frame sequence with its inferred cadence."""

    id: str
    capture_interval_s: float
    frame_width: int
    frame_height: int
    frames: tuple[FrameRecord, ...]
    capture_date: date
    # (index of the frame before the gap, gap length in seconds) for gaps
    # deviating from the inferred cadence by more than one second
    missing_gaps: tuple[tuple[int, float], ...] = field(default=())

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "capture_interval_s": self.capture_interval_s,
            "frame_width": self.frame_width,
            "frame_height": self.frame_height,
            "capture_date": self.capture_date.isoformat(),
            "frames": [[f.index, iso_utc(f.capture_time), f.filename] for f in self.frames],
            "missing_gaps": [list(g) for g in self.missing_gaps],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Dataset":
        return cls(
            id=data["id"],
            capture_interval_s=float(data["capture_interval_s"]),
            frame_width=int(data["frame_width"]),
            frame_height=int(data["frame_height"]),
            frames=tuple(
                FrameRecord(int(i), parse_utc(ts), name) for i, ts, name in data["frames"]
            ),
            capture_date=date.fromisoformat(data["capture_date"]),
            missing_gaps=tuple((int(i), float(g)) for i, g in data.get("missing_gaps", [])),
        )


def infer_interval(times: Sequence[datetime]) -> tuple[float, list[tuple[int, float]]]:
    """Median gap plus annotations for gaps more than 1 s off the median.

    Tolerates isolated dropped frames: a dropped frame shows up as one long
    gap, which is annotated rather than rejected.
    """
    if len(times) < 2:
        return DEFAULT_INTERVAL_S, []
    gaps = [(times[i + 1] - times[i]).total_seconds() for i in range(len(times) - 1)]
    interval = float(median(gaps))
    if interval <= 0:
        raise ValidationError("frame timestamps are not strictly increasing")
    irregular = [(i, g) for i, g in enumerate(gaps) if abs(g - interval) > 1.0]
    return interval, irregular


def ingest_frames(store: DataStore, dataset_id: str, source_directory: Path) -> Dataset:
    """Copy a directory of timestamp-named images into the store.

    The whole ingest is rejected (nothing persisted) on the first offending
    file: unparsable name, unreadable image, or dimensions that do not match
    the first frame.
    """
    validate_dataset_id(dataset_id)
    src = Path(source_directory)
    if not src.is_dir():
        raise StorageError(f"source directory {src} does not exist")
    files = sorted(p for p in src.iterdir() if p.is_file())
    if not files:
        raise ValidationError(f"source directory {src} contains no frame files")

    stamped: list[tuple[datetime, Path]] = []
    for path in files:
        stamped.append((parse_frame_filename(path.name), path))
    stamped.sort(key=lambda item: item[0])
    for (t_a, p_a), (t_b, p_b) in zip(stamped, stamped[1:]):
        if t_a == t_b:
            raise ValidationError(f"duplicate frame timestamp in {p_a.name} and {p_b.name}")

    width = height = None
    for t, path in stamped:
        try:
            with Image.open(path) as im:
                w, h = im.size
        except Exception as exc:
            raise ValidationError(f"unreadable image file {path.name}: {exc}") from exc
        if width is None:
            width, height = w, h
        elif (w, h) != (width, height):
            raise ValidationError(
                f"mixed frame dimensions: {path.name} is {w}x{h}, expected {width}x{height}"
            )

    times = [t for t, _ in stamped]
    interval, irregular = infer_interval(times)

    frames_dir = store.frames_dir(dataset_id)
    frames_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for index, (t, path) in enumerate(stamped):
        name = frame_filename(t, path.suffix.lower())
        dest = frames_dir / name
        if path.resolve() != dest.resolve():
            shutil.copyfile(path, dest)
        records.append(FrameRecord(index, t, name))

    dataset = Dataset(
        id=dataset_id,
        capture_interval_s=interval,
        frame_width=width,
        frame_height=height,
        frames=tuple(records),
        capture_date=times[0].date(),
        missing_gaps=tuple(irregular),
    )
    store.dataset_manifest(dataset_id).write_text(json.dumps(dataset.to_json()))
    return dataset


def load_dataset(store: DataStore, dataset_id: str) -> Dataset:
    path = store.dataset_manifest(dataset_id)
    if not path.is_file():
        raise NotFoundError(f"unknown dataset {dataset_id!r}")
    return Dataset.from_json(json.loads(path.read_text()))


def load_frame_image(store: DataStore, dataset: Dataset, index: int) -> np.ndarray:
    """Decode frame ``index`` to a (H, W, 3) uint8 RGB array."""
    if not 0 <= index < dataset.frame_count:
        raise NotFoundError(f"frame {index} out of range for dataset {dataset.id!r}")
    path = store.frames_dir(dataset.id) / dataset.frames[index].filename
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def iter_frame_images(store: DataStore, dataset: Dataset) -> Iterator[np.ndarray]:
    for frame in dataset.frames:
        path = store.frames_dir(dataset.id) / frame.filename
        with Image.open(path) as im:
            yield np.asarray(im.convert("RGB"), dtype=np.uint8)


def frame_index_at(dataset: Dataset, t: datetime) -> int:
    """Index of the frame with the largest capture_time <= t; 0 if earlier."""
    if not dataset.frames:
        raise ValidationError("dataset has no frames")
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    times = [f.capture_time for f in dataset.frames]
    pos = bisect.bisect_right(times, t)
    return max(pos - 1, 0)


# --- pyramid geometry ------------------------------------------------------


def num_levels_for(frame_width: int, frame_height: int, tile_size: int) -> int:
    """Smallest L with max(w, h) / 2^(L-1) <= tile_size."""
    levels = 1
    largest = max(frame_width, frame_height)
    while largest > tile_size * (1 << (levels - 1)):
        levels += 1
    return levels


@dataclass(frozen=True)
class TilePyramid:
    dataset_id: str
    tile_size: int
    num_levels: int
    frame_width: int
    frame_height: int
    frame_count: int
    segment_len: int

    def scale(self, level: int) -> int:
        """Downscale factor of a level relative to native resolution."""
        return 1 << (self.num_levels - 1 - level)

    def level_size(self, level: int) -> tuple[int, int]:
        """Content (width, height) at a level: native dims ceil-halved."""
        w, h = self.frame_width, self.frame_height
        for _ in range(self.num_levels - 1 - level):
            w = (w + 1) // 2
            h = (h + 1) // 2
        return w, h

    def grid(self, level: int) -> tuple[int, int]:
        """(rows, cols) of the tile grid at a level."""
        span = self.tile_size * self.scale(level)
        cols = -(-self.frame_width // span)
        rows = -(-self.frame_height // span)
        return rows, cols

    def validate_level(self, level: int) -> None:
        if not 0 <= level < self.num_levels:
            raise NotFoundError(f"level {level} out of range (0..{self.num_levels - 1})")

    def to_json(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "tile_size": self.tile_size,
            "num_levels": self.num_levels,
            "frame_width": self.frame_width,
            "frame_height": self.frame_height,
            "frame_count": self.frame_count,
            "segment_len": self.segment_len,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TilePyramid":
        return cls(**{k: (data[k] if k == "dataset_id" else int(data[k])) for k in (
            "dataset_id", "tile_size", "num_levels", "frame_width",
            "frame_height", "frame_count", "segment_len",
        )})


@dataclass(frozen=True)
class TileAddress:
    level: int
    row: int
    col: int
    frame_start: int
    frame_count: int


def downscale_halve(img: np.ndarray) -> np.ndarray:
    """One 2x2 box-filter halving, rounding half up.

    Odd dimensions are padded with one row/column of black first, matching
    the black padding used for edge tiles.
    """
    h, w = img.shape[:2]
    if h % 2 or w % 2:
        padded = np.zeros((h + h % 2, w + w % 2, 3), dtype=np.uint8)
        padded[:h, :w] = img
        img = padded
    acc = img[0::2, 0::2].astype(np.uint16)
    acc += img[1::2, 0::2]
    acc += img[0::2, 1::2]
    acc += img[1::2, 1::2]
    return ((acc + 2) >> 2).astype(np.uint8)


# --- PWTC tile clip container ----------------------------------------------
#
# Byte layout (little endian), also documented in the README:
#   0   4   magic  b"PWTC"
#   4   1   version (1)
#   5   1   reserved (0)
#   6   2   frame width  (u16)
#   8   2   frame height (u16)
#   10  2   frame count  (u16)
#   12  4*n u32 compressed byte length of each frame
#   ... concatenated zlib streams, each inflating to width*height*3 bytes of
#       row-major RGB
#
# Frames are compressed independently so clips can be sliced and re-served
# without recompression.

_PWTC_MAGIC = b"PWTC"
_PWTC_VERSION = 1


def _encode_records(width: int, height: int, records: Sequence[bytes]) -> bytes:
    header = _PWTC_MAGIC + struct.pack(
        "<BBHHH", _PWTC_VERSION, 0, width, height, len(records)
    )
    table = struct.pack(f"<{len(records)}I", *(len(r) for r in records))
    return header + table + b"".join(records)


def encode_clip(frames: np.ndarray) -> bytes:
    """Pack a (n, H, W, 3) uint8 stack into PWTC bytes."""
    frames = np.ascontiguousarray(frames, dtype=np.uint8)
    n, h, w = frames.shape[:3]
    records = [zlib.compress(frames[i].tobytes(), 1) for i in range(n)]
    return _encode_records(w, h, records)


def _parse_clip(data: bytes) -> tuple[int, int, list[bytes]]:
    if len(data) < 12 or data[:4] != _PWTC_MAGIC:
        raise StorageError("not a PWTC clip")
    version, _, width, height, count = struct.unpack("<BBHHH", data[4:12])
    if version != _PWTC_VERSION:
        raise StorageError(f"unsupported PWTC version {version}")
    table_end = 12 + 4 * count
    lengths = struct.unpack(f"<{count}I", data[12:table_end])
    records = []
    offset = table_end
    for length in lengths:
        records.append(data[offset:offset + length])
        offset += length
    return width, height, records


def decode_clip(data: bytes) -> np.ndarray:
    """Inverse of :func:`encode_clip`; returns (n, H, W, 3) uint8."""
    width, height, records = _parse_clip(data)
    out = np.empty((len(records), height, width, 3), dtype=np.uint8)
    for i, record in enumerate(records):
        raw = zlib.decompress(record)
        out[i] = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return out


def build_pyramid(
    store: DataStore,
    dataset_id: str,
    tile_size: int = DEFAULT_TILE_SIZE,
    segment_len: int = DEFAULT_SEGMENT_LEN,
) -> TilePyramid:
    """Cut every frame of a dataset into per-level tile clips on disk.

    Deterministic: identical input frames produce identical tile bytes.
    Memory holds one segment of compressed tiles at a time, so lower
    ``segment_len`` for very long or high-entropy datasets.
    """
    if tile_size < 1:
        raise ValidationError("tile_size must be >= 1")
    if segment_len < 1:
        raise ValidationError("segment_len must be >= 1")
    dataset = load_dataset(store, dataset_id)
    pyramid = TilePyramid(
        dataset_id=dataset_id,
        tile_size=tile_size,
        num_levels=num_levels_for(dataset.frame_width, dataset.frame_height, tile_size),
        frame_width=dataset.frame_width,
        frame_height=dataset.frame_height,
        frame_count=dataset.frame_count,
        segment_len=segment_len,
    )

    tiles_root = store.tiles_dir(dataset_id)
    if tiles_root.exists():
        shutil.rmtree(tiles_root)
    for level in range(pyramid.num_levels):
        rows, cols = pyramid.grid(level)
        for row in range(rows):
            for col in range(cols):
                (tiles_root / str(level) / f"{row}_{col}").mkdir(parents=True, exist_ok=True)

    ts = tile_size
    n_segments = -(-dataset.frame_count // segment_len)
    for segment in range(n_segments):
        lo = segment * segment_len
        hi = min(lo + segment_len, dataset.frame_count)
        buffers: dict[tuple[int, int, int], list[bytes]] = {}
        for index in range(lo, hi):
            img = load_frame_image(store, dataset, index)
            for level in range(pyramid.num_levels - 1, -1, -1):
                rows, cols = pyramid.grid(level)
                for row in range(rows):
                    for col in range(cols):
                        tile = np.zeros((ts, ts, 3), dtype=np.uint8)
                        chunk = img[row * ts:(row + 1) * ts, col * ts:(col + 1) * ts]
                        tile[:chunk.shape[0], :chunk.shape[1]] = chunk
                        buffers.setdefault((level, row, col), []).append(
                            zlib.compress(tile.tobytes(), 1)
                        )
                if level > 0:
                    img = downscale_halve(img)
        for (level, row, col), records in buffers.items():
            path = store.tile_segment(dataset_id, level, row, col, segment)
            path.write_bytes(_encode_records(ts, ts, records))

    store.pyramid_manifest(dataset_id).write_text(json.dumps(pyramid.to_json()))
    return pyramid


def load_pyramid(store: DataStore, dataset_id: str) -> TilePyramid:
    path = store.pyramid_manifest(dataset_id)
    if not path.is_file():
        raise NotFoundError(f"dataset {dataset_id!r} has no tile pyramid")
    return TilePyramid.from_json(json.loads(path.read_text()))


def get_tile(store: DataStore, dataset_id: str, address: TileAddress) -> bytes:
    """Return the addressed tile clip as PWTC bytes.

    Slices stored segments record-by-record, so no pixel data is
    recompressed on the way out.
    """
    pyramid = load_pyramid(store, dataset_id)
    pyramid.validate_level(address.level)
    rows, cols = pyramid.grid(address.level)
    if not (0 <= address.row < rows and 0 <= address.col < cols):
        raise NotFoundError(
            f"tile ({address.row},{address.col}) outside {rows}x{cols} grid at level {address.level}"
        )
    if address.frame_count < 1 or address.frame_start < 0 or (
        address.frame_start + address.frame_count > pyramid.frame_count
    ):
        raise NotFoundError(
            f"frame range [{address.frame_start}, {address.frame_start + address.frame_count}) "
            f"outside dataset of {pyramid.frame_count} frames"
        )

    records: list[bytes] = []
    seg_len = pyramid.segment_len
    first = address.frame_start // seg_len
    last = (address.frame_start + address.frame_count - 1) // seg_len
    for segment in range(first, last + 1):
        path = store.tile_segment(dataset_id, address.level, address.row, address.col, segment)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise StorageError(f"missing tile segment {path}") from exc
        _, _, seg_records = _parse_clip(data)
        seg_lo = segment * seg_len
        lo = max(address.frame_start - seg_lo, 0)
        hi = min(address.frame_start + address.frame_count - seg_lo, len(seg_records))
        records.extend(seg_records[lo:hi])
    return _encode_records(pyramid.tile_size, pyramid.tile_size, records)


def read_tile_frames(store: DataStore, dataset_id: str, address: TileAddress) -> np.ndarray:
    return decode_clip(get_tile(store, dataset_id, address))
