"""Sharable animated crops: spec <-> URL codec and the GIF render path.

Every generated image is addressed by a URL of the exact shape

    /thumbnail?root=<id>&boundsLTRB=<l>,<t>,<r>,<b>&width=<w>&height=<h>
        &startFrame=<s>&nframes=<n>&fps=<f>&format=<fmt>&origin=<human|algorithm>

with plain decimal integers and parameters in exactly that order, so served
URLs can be reproduced bit-for-bit from access logs. ``origin`` records
whether a human drew the crop or the smoke detector emitted it.
"""

from __future__ import annotations

import io
import re
import struct
from dataclasses import dataclass
from urllib.parse import parse_qsl, urlsplit

import numpy as np
from PIL import Image

from .errors import PlumewatchError, ValidationError
from .storage import DataStore
from .timelapse import Dataset, load_dataset, load_frame_image

FORMATS = ("gif", "mp4")
ORIGINS = ("human", "algorithm")

THUMBNAIL_PATH = "/thumbnail"
_PARAM_ORDER = (
    "root", "boundsLTRB", "width", "height", "startFrame", "nframes", "fps", "format", "origin",
)
_INT_RE = re.compile(r"^-?\d+$")


class SpecParseError(ValidationError):
    """URL or JSON field failed to produce a valid ThumbnailSpec."""

    def __init__(self, parameter: str, message: str):
        super().__init__(message)
        self.parameter = parameter


class Mp4StubError(PlumewatchError):
    """The mp4 output path is a stub kept behind the shared interface."""


@dataclass(frozen=True)
class ThumbnailSpec:
    dataset_id: str
    bounds: tuple[int, int, int, int]  # left, top, right, bottom in native px
    out_width: int
    out_height: int
    start_frame: int
    nframes: int
    fps: int
    format: str = "gif"
    origin: str = "human"

    @property
    def duration_s(self) -> float:
        return self.nframes / self.fps

    def validate(self, dataset: Dataset | None = None) -> None:
        """Internal consistency always; bounds vs. frame only with a dataset."""
        left, top, right, bottom = self.bounds
        if left < 0 or top < 0:
            raise SpecParseError("boundsLTRB", "bounds must be non-negative")
        if left >= right:
            raise SpecParseError("boundsLTRB", f"left >= right ({left} >= {right})")
        if top >= bottom:
            raise SpecParseError("boundsLTRB", f"top >= bottom ({top} >= {bottom})")
        if self.out_width < 1:
            raise SpecParseError("width", "width must be >= 1")
        if self.out_height < 1:
            raise SpecParseError("height", "height must be >= 1")
        if self.start_frame < 0:
            raise SpecParseError("startFrame", "startFrame must be >= 0")
        if self.nframes < 1:
            raise SpecParseError("nframes", "nframes must be >= 1")
        if self.fps < 1:
            raise SpecParseError("fps", "fps must be >= 1")
        if self.format not in FORMATS:
            raise SpecParseError("format", f"format must be one of {FORMATS}")
        if self.origin not in ORIGINS:
            raise SpecParseError("origin", f"origin must be one of {ORIGINS}")
        if dataset is not None:
            if right > dataset.frame_width:
                raise SpecParseError(
                    "boundsLTRB", f"right {right} exceeds frame width {dataset.frame_width}"
                )
            if bottom > dataset.frame_height:
                raise SpecParseError(
                    "boundsLTRB", f"bottom {bottom} exceeds frame height {dataset.frame_height}"
                )
            if self.start_frame + self.nframes > dataset.frame_count:
                raise SpecParseError(
                    "nframes",
                    f"frames [{self.start_frame}, {self.start_frame + self.nframes}) exceed "
                    f"dataset of {dataset.frame_count} frames",
                )

    def to_json(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "bounds": list(self.bounds),
            "out_width": self.out_width,
            "out_height": self.out_height,
            "start_frame": self.start_frame,
            "nframes": self.nframes,
            "fps": self.fps,
            "format": self.format,
            "origin": self.origin,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ThumbnailSpec":
        def need(key):
            if key not in data:
                raise SpecParseError(key, f"missing field {key!r}")
            return data[key]

        def intfield(key):
            value = need(key)
            if isinstance(value, bool) or not isinstance(value, int):
                raise SpecParseError(key, f"field {key!r} must be an integer")
            return value

        bounds = need("bounds")
        if not (isinstance(bounds, (list, tuple)) and len(bounds) == 4):
            raise SpecParseError("bounds", "bounds must be a 4-item [l, t, r, b] list")
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in bounds):
            raise SpecParseError("bounds", "bounds entries must be integers")
        spec = cls(
            dataset_id=str(need("dataset_id")),
            bounds=tuple(bounds),
            out_width=intfield("out_width"),
            out_height=intfield("out_height"),
            start_frame=intfield("start_frame"),
            nframes=intfield("nframes"),
            fps=intfield("fps"),
            format=str(data.get("format", "gif")),
            origin=str(data.get("origin", "human")),
        )
        spec.validate()
        return spec


def encode_url(spec: ThumbnailSpec) -> str:
    left, top, right, bottom = spec.bounds
    return (
        f"{THUMBNAIL_PATH}?root={spec.dataset_id}"
        f"&boundsLTRB={left},{top},{right},{bottom}"
        f"&width={spec.out_width}&height={spec.out_height}"
        f"&startFrame={spec.start_frame}&nframes={spec.nframes}&fps={spec.fps}"
        f"&format={spec.format}&origin={spec.origin}"
    )


def _parse_int(params: dict, key: str) -> int:
    value = params[key]
    if not _INT_RE.match(value):
        raise SpecParseError(key, f"parameter {key!r} must be a decimal integer, got {value!r}")
    return int(value)


def decode_url(url: str) -> ThumbnailSpec:
    """Inverse of :func:`encode_url`.

    Unknown extra parameters are ignored; a missing ``origin`` defaults to
    ``human`` so logs that predate the origin split stay decodable.
    """
    parts = urlsplit(url)
    if parts.path != THUMBNAIL_PATH:
        raise SpecParseError("path", f"not a thumbnail URL: {parts.path!r}")
    params: dict[str, str] = {}
    for key, value in parse_qsl(parts.query, keep_blank_values=True):
        params.setdefault(key, value)
    for key in ("root", "boundsLTRB", "width", "height", "startFrame", "nframes", "fps", "format"):
        if key not in params:
            raise SpecParseError(key, f"missing required parameter {key!r}")

    raw_bounds = params["boundsLTRB"].split(",")
    if len(raw_bounds) != 4 or not all(_INT_RE.match(v) for v in raw_bounds):
        raise SpecParseError(
            "boundsLTRB", f"boundsLTRB must be four comma-separated integers, got "
            f"{params['boundsLTRB']!r}"
        )
    spec = ThumbnailSpec(
        dataset_id=params["root"],
        bounds=tuple(int(v) for v in raw_bounds),
        out_width=_parse_int(params, "width"),
        out_height=_parse_int(params, "height"),
        start_frame=_parse_int(params, "startFrame"),
        nframes=_parse_int(params, "nframes"),
        fps=_parse_int(params, "fps"),
        format=params["format"],
        origin=params.get("origin", "human"),
    )
    spec.validate()
    return spec


# --- rendering --------------------------------------------------------------


def render_frames(store: DataStore, spec: ThumbnailSpec) -> np.ndarray:
    """Crop + resample the source frames; the lossless half of rendering.

    Frame k of the result is source frame start_frame+k cropped to bounds
    and bilinearly resampled to (out_width, out_height). When the crop
    already has the output size the pixels pass through untouched.
    """
    dataset = load_dataset(store, spec.dataset_id)
    spec.validate(dataset)
    left, top, right, bottom = spec.bounds
    out = np.empty((spec.nframes, spec.out_height, spec.out_width, 3), dtype=np.uint8)
    passthrough = (spec.out_width, spec.out_height) == (right - left, bottom - top)
    for k in range(spec.nframes):
        img = load_frame_image(store, dataset, spec.start_frame + k)
        crop = img[top:bottom, left:right]
        if passthrough:
            out[k] = crop
        else:
            resized = Image.fromarray(crop).resize(
                (spec.out_width, spec.out_height), Image.Resampling.BILINEAR
            )
            out[k] = np.asarray(resized, dtype=np.uint8)
    return out


def gif_frame_delay_cs(fps: int) -> int:
    """Per-frame GIF delay in hundredths of a second: round(100/fps), half up."""
    return int(100 / fps + 0.5)


def _palettize(frame: np.ndarray) -> Image.Image:
    """Exact palette when the frame fits in 256 colors, median cut otherwise."""
    h, w = frame.shape[:2]
    packed = (
        frame[:, :, 0].astype(np.uint32) << 16
        | frame[:, :, 1].astype(np.uint32) << 8
        | frame[:, :, 2].astype(np.uint32)
    )
    colors, inverse = np.unique(packed, return_inverse=True)
    if len(colors) <= 256:
        image = Image.frombytes("P", (w, h), inverse.astype(np.uint8).tobytes())
        palette = np.zeros((256, 3), dtype=np.uint8)
        palette[: len(colors), 0] = colors >> 16 & 0xFF
        palette[: len(colors), 1] = colors >> 8 & 0xFF
        palette[: len(colors), 2] = colors & 0xFF
        image.putpalette(palette.ravel().tolist())
        return image
    return Image.fromarray(frame).quantize(
        colors=256, method=Image.Quantize.MEDIANCUT, dither=Image.Dither.NONE
    )


def encode_gif(frames: np.ndarray, fps: int) -> bytes:
    """GIF89a-encode a (n, H, W, 3) uint8 stack; deterministic for fixed input.

    The container is written by hand (header, loop extension, one graphic
    control + image block per input frame with its own local color table) so
    the output always has exactly n frames; Pillow's writer would merge
    identical consecutive frames. Pixel data still goes through Pillow's LZW
    encoder.
    """
    from PIL import GifImagePlugin

    delay_cs = gif_frame_delay_cs(fps)
    n, height, width = frames.shape[:3]
    buf = io.BytesIO()
    buf.write(b"GIF89a")
    buf.write(struct.pack("<HH", width, height))
    buf.write(bytes([0x00, 0, 0]))  # no global color table
    buf.write(b"\x21\xff\x0bNETSCAPE2.0\x03\x01\x00\x00\x00")  # loop forever
    for i in range(n):
        image = _palettize(frames[i])
        # graphic control: disposal "leave in place", no transparency
        buf.write(struct.pack("<BBBBHBB", 0x21, 0xF9, 4, 0x04, delay_cs, 0, 0))
        for block in GifImagePlugin.getdata(image, (0, 0), include_color_table=True):
            buf.write(block)
    buf.write(b";")
    return buf.getvalue()


def decode_gif(data: bytes) -> tuple[np.ndarray, int]:
    """Decode a GIF into ((n, H, W, 3) uint8, per-frame delay in ms)."""
    with Image.open(io.BytesIO(data)) as im:
        delay = int(im.info.get("duration", 0))
        frames = []
        for k in range(getattr(im, "n_frames", 1)):
            im.seek(k)
            frames.append(np.asarray(im.convert("RGB"), dtype=np.uint8))
    return np.stack(frames), delay


def render_thumbnail(store: DataStore, spec: ThumbnailSpec) -> bytes:
    """Encoded animated image for a spec; pure in (spec, dataset bytes)."""
    if spec.format == "mp4":
        raise Mp4StubError("mp4 output is not implemented; request format=gif")
    frames = render_frames(store, spec)
    return encode_gif(frames, spec.fps)
