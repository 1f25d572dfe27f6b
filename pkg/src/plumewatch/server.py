"""HTTP gateway: tiles, thumbnails, telemetry, smoke results, analytics feed.

Every request is appended to an NCSA-combined access log, which is exactly
what the usage-analytics pipeline consumes; GET /thumbnail lines are the
views and POST /api/thumbnail lines are the creation events. The server is a
threading stdlib HTTP server: telemetry writes are serialized inside
TelemetryStore, tile/thumbnail requests only read immutable files, and log
appends hold a lock so each line lands atomically.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qsl, urlsplit

from . import smoke, telemetry, thumbnails, timelapse
from .config import ServiceConfig
from .errors import NotFoundError, PlumewatchError, ValidationError
from .storage import DataStore
from .telemetry import TelemetryStore
from .thumbnails import Mp4StubError, SpecParseError, ThumbnailSpec

_TILE_ROUTE = re.compile(r"^/tiles/([^/]+)/(\d+)/(\d+)/(\d+)$")
_SMOKE_ROUTE = re.compile(r"^/api/smoke/([^/]+)$")


class _RateLimiter:
    """Token bucket per client ip; rate <= 0 disables limiting."""

    def __init__(self, rate: float):
        self.rate = rate
        self.capacity = max(rate, 1.0)
        self._buckets: dict[str, tuple[float, float]] = {}
        self._lock = threading.Lock()

    def allow(self, ip: str) -> bool:
        if self.rate <= 0:
            return True
        now = time.monotonic()
        with self._lock:
            tokens, last = self._buckets.get(ip, (self.capacity, now))
            tokens = min(self.capacity, tokens + (now - last) * self.rate)
            if tokens >= 1.0:
                self._buckets[ip] = (tokens - 1.0, now)
                return True
            self._buckets[ip] = (tokens, now)
            return False


class _AccessLog:
    def __init__(self, path):
        path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = path.open("a", encoding="utf-8")
        self._lock = threading.Lock()

    def write(self, ip: str, method: str, path_query: str, status: int,
              size: int, referer: str, agent: str) -> None:
        when = datetime.now(timezone.utc).strftime("%d/%b/%Y:%H:%M:%S %z")
        line = (
            f'{ip} - - [{when}] "{method} {path_query} HTTP/1.1" {status} '
            f'{size if size else "-"} "{referer or "-"}" "{agent or "-"}"\n'
        )
        with self._lock:
            self._fh.write(line)
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            self._fh.close()


class PlumewatchServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, config: ServiceConfig):
        config.validate()
        self.config = config
        self.store = DataStore(config.data_root)
        self.telemetry = TelemetryStore(self.store.telemetry_db())
        stations = self.store.stations_csv()
        if stations.is_file():
            self.telemetry.sync_stations_csv(stations)
        self.access_log = _AccessLog(config.resolved_log_path())
        self.rate_limiter = _RateLimiter(config.thumbnail_rate_limit)
        super().__init__((config.listen_host, config.listen_port), _Handler)

    def server_close(self) -> None:
        super().server_close()
        self.telemetry.close()
        self.access_log.close()


def serve(config: ServiceConfig) -> PlumewatchServer:
    """Construct a ready-to-run server; caller drives serve_forever()."""
    return PlumewatchServer(config)


@dataclass
class _Response:
    status: int
    body: bytes
    content_type: str
    headers: dict = field(default_factory=dict)


def _json_response(status: int, payload) -> _Response:
    return _Response(status, json.dumps(payload).encode(), "application/json")


def _error_response(status: int, message: str, parameter: str | None = None) -> _Response:
    payload = {"error": message}
    if parameter:
        payload["parameter"] = parameter
    return _json_response(status, payload)


class _Handler(BaseHTTPRequestHandler):
    server: PlumewatchServer
    server_version = "plumewatch"
    protocol_version = "HTTP/1.1"

    # -- plumbing ---------------------------------------------------------

    def log_message(self, *args) -> None:  # replaced by the access log
        pass

    def _client_ip(self) -> str:
        if self.server.config.trust_forwarded_for:
            forwarded = self.headers.get("X-Forwarded-For")
            if forwarded:
                return forwarded.split(",")[0].strip()
        return self.client_address[0]

    def _finish(self, response: _Response) -> None:
        body = response.body
        self.send_response(response.status)
        self.send_header("Content-Type", response.content_type)
        self.send_header("Content-Length", str(len(body)))
        for key, value in response.headers.items():
            self.send_header(key, value)
        self.end_headers()
        try:
            self.wfile.write(body)
        except (BrokenPipeError, ConnectionResetError):
            pass
        self.server.access_log.write(
            self._client_ip(), self.command, self.path, response.status, len(body),
            self.headers.get("Referer", "-"), self.headers.get("User-Agent", "-"),
        )

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            payload = json.loads(raw or b"{}")
        except json.JSONDecodeError as exc:
            raise ValidationError(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ValidationError("request body must be a JSON object")
        return payload

    def _dispatch(self, handler) -> None:
        try:
            response = handler()
        except SpecParseError as exc:
            response = _error_response(400, str(exc), parameter=exc.parameter)
        except NotFoundError as exc:
            response = _error_response(404, str(exc))
        except Mp4StubError as exc:
            response = _error_response(501, str(exc))
        except ValidationError as exc:
            response = _error_response(400, str(exc))
        except PlumewatchError as exc:
            response = _error_response(500, str(exc))
        except Exception as exc:  # keep the service alive; surface the cause
            response = _error_response(500, f"internal error: {exc}")
        self._finish(response)

    # -- verbs --------------------------------------------------------------

    def do_GET(self) -> None:
        self._dispatch(self._route_get)

    def do_POST(self) -> None:
        self._dispatch(self._route_post)

    # -- GET routes ------------------------------------------------------------

    def _route_get(self) -> _Response:
        parts = urlsplit(self.path)
        params = dict(parse_qsl(parts.query, keep_blank_values=True))
        path = parts.path

        tile = _TILE_ROUTE.match(path)
        if tile:
            return self._get_tile(tile, params)
        if path == thumbnails.THUMBNAIL_PATH:
            return self._get_thumbnail()
        smoke_match = _SMOKE_ROUTE.match(path)
        if smoke_match:
            return self._get_smoke(smoke_match.group(1))
        if path == "/api/datasets":
            return self._get_datasets()
        if path == "/api/series":
            return self._get_series(params)
        if path == "/api/context":
            return self._get_context(params)
        if path == "/api/frame_index":
            return self._get_frame_index(params)
        static = self._get_static(path)
        if static is not None:
            return static
        raise NotFoundError(f"no route for {path}")

    _STATIC_TYPES = {
        ".html": "text/html; charset=utf-8",
        ".js": "text/javascript",
        ".css": "text/css",
        ".map": "application/json",
        ".png": "image/png",
        ".svg": "image/svg+xml",
    }

    def _get_static(self, path: str) -> _Response | None:
        """Optional dashboard hosting: files under config.ui_dir, same origin
        as the API so the browser needs no CORS setup."""
        ui_dir = self.server.config.ui_dir
        if ui_dir is None:
            return None
        if path == "/":
            path = "/index.html"
        base = ui_dir.resolve()
        target = (base / path.lstrip("/")).resolve()
        if not target.is_relative_to(base) or not target.is_file():
            return None
        content_type = self._STATIC_TYPES.get(target.suffix)
        if content_type is None:
            return None
        return _Response(200, target.read_bytes(), content_type)

    def _get_tile(self, match: re.Match, params: dict) -> _Response:
        dataset_id = match.group(1)
        try:
            start = int(params.get("startFrame", "0"))
            count = int(params.get("nframes", "1"))
        except ValueError:
            raise ValidationError("startFrame and nframes must be integers") from None
        address = timelapse.TileAddress(
            level=int(match.group(2)), row=int(match.group(3)), col=int(match.group(4)),
            frame_start=start, frame_count=count,
        )
        clip = timelapse.get_tile(self.server.store, dataset_id, address)
        return _Response(200, clip, "application/octet-stream")

    def _get_thumbnail(self) -> _Response:
        if not self.server.rate_limiter.allow(self._client_ip()):
            return _error_response(429, "thumbnail rate limit exceeded")
        spec = thumbnails.decode_url(self.path)
        gif = thumbnails.render_thumbnail(self.server.store, spec)
        return _Response(200, gif, "image/gif")

    def _get_smoke(self, dataset_id: str) -> _Response:
        timelapse.load_dataset(self.server.store, dataset_id)  # 404 when unknown
        frames = smoke.load_frame_results(self.server.store, dataset_id)
        pairs = smoke.list_event_thumbnails(self.server.store, dataset_id)
        return _json_response(200, {
            "frames": [
                {
                    "frame_index": r.frame_index,
                    "smoke_pixel_count": r.smoke_pixel_count,
                    "is_daytime": r.is_daytime,
                }
                for r in frames
            ],
            "events": [
                {
                    "start_frame": e.start_frame,
                    "end_frame": e.end_frame,
                    "peak_count": e.peak_count,
                    "bounds": list(e.bounds),
                    "url": url,
                }
                for url, e in pairs
            ],
        })

    def _get_datasets(self) -> _Response:
        out = []
        for dataset_id in self.server.store.list_datasets():
            dataset = timelapse.load_dataset(self.server.store, dataset_id)
            info = {
                "id": dataset.id,
                "capture_date": dataset.capture_date.isoformat(),
                "capture_interval_s": dataset.capture_interval_s,
                "frame_width": dataset.frame_width,
                "frame_height": dataset.frame_height,
                "frame_count": dataset.frame_count,
                "start_time": timelapse.iso_utc(dataset.frames[0].capture_time),
                "end_time": timelapse.iso_utc(dataset.frames[-1].capture_time),
                "tiled": False,
            }
            try:
                pyramid = timelapse.load_pyramid(self.server.store, dataset_id)
                info.update(tiled=True, tile_size=pyramid.tile_size,
                            num_levels=pyramid.num_levels)
            except NotFoundError:
                pass
            out.append(info)
        return _json_response(200, out)

    def _get_series(self, params: dict) -> _Response:
        for key in ("stations", "t0", "t1", "bucket"):
            if key not in params:
                raise ValidationError(f"missing query parameter {key!r}")
        stations = [s for s in params["stations"].split(",") if s]
        try:
            bucket = int(params["bucket"])
        except ValueError:
            raise ValidationError("bucket must be an integer number of seconds") from None
        series = self.server.telemetry.query_series(
            stations, timelapse.parse_utc(params["t0"]), timelapse.parse_utc(params["t1"]),
            bucket,
        )
        return _json_response(200, {
            "series": {
                station: [
                    {
                        "bucket_start": timelapse.iso_utc(b.bucket_start),
                        "mean": b.mean,
                        "count": b.count,
                    }
                    for b in buckets
                ]
                for station, buckets in series.items()
            }
        })

    def _get_context(self, params: dict) -> _Response:
        if "t" not in params:
            raise ValidationError("missing query parameter 't'")
        snapshot = self.server.telemetry.query_context(timelapse.parse_utc(params["t"]))
        return _json_response(200, {
            "wind": telemetry.wind_to_json(snapshot.wind) if snapshot.wind else None,
            "smell_reports": [telemetry.smell_to_json(s) for s in snapshot.smell_reports],
            "latest_readings": {
                station: telemetry.reading_to_json(r)
                for station, r in snapshot.latest_readings.items()
            },
        })

    def _get_frame_index(self, params: dict) -> _Response:
        for key in ("dataset", "t"):
            if key not in params:
                raise ValidationError(f"missing query parameter {key!r}")
        dataset = timelapse.load_dataset(self.server.store, params["dataset"])
        index = timelapse.frame_index_at(dataset, timelapse.parse_utc(params["t"]))
        return _json_response(200, {
            "dataset": dataset.id,
            "frame_index": index,
            "capture_time": timelapse.iso_utc(dataset.frames[index].capture_time),
        })

    # -- POST routes --------------------------------------------------------------

    def _route_post(self) -> _Response:
        path = urlsplit(self.path).path
        if path == "/api/thumbnail":
            return self._post_thumbnail()
        if path == "/api/readings":
            return self._post_reading()
        if path == "/api/wind":
            return self._post_wind()
        if path == "/api/smell":
            return self._post_smell()
        raise NotFoundError(f"no route for {path}")

    def _require_admin(self) -> None:
        token = self.server.config.admin_token
        if token and self.headers.get("X-Admin-Token") != token:
            raise ValidationError("missing or bad X-Admin-Token")

    def _post_thumbnail(self) -> _Response:
        spec = ThumbnailSpec.from_json(self._read_json())
        dataset = timelapse.load_dataset(self.server.store, spec.dataset_id)
        spec.validate(dataset)
        return _json_response(200, {"url": thumbnails.encode_url(spec)})

    def _post_reading(self) -> _Response:
        self._require_admin()
        body = self._read_json()
        for key in ("station_id", "t", "pm25"):
            if key not in body:
                raise ValidationError(f"missing field {key!r}")
        self.server.telemetry.ingest_reading(telemetry.SensorReading(
            station_id=str(body["station_id"]),
            t=timelapse.parse_utc(str(body["t"])),
            pm25=float(body["pm25"]),
        ))
        return _json_response(200, {"ok": True})

    def _post_wind(self) -> _Response:
        self._require_admin()
        body = self._read_json()
        for key in ("t", "speed", "direction"):
            if key not in body:
                raise ValidationError(f"missing field {key!r}")
        self.server.telemetry.ingest_wind(telemetry.WindReading(
            t=timelapse.parse_utc(str(body["t"])),
            speed=float(body["speed"]),
            direction=float(body["direction"]),
        ))
        return _json_response(200, {"ok": True})

    def _post_smell(self) -> _Response:
        body = self._read_json()
        for key in ("t", "severity"):
            if key not in body:
                raise ValidationError(f"missing field {key!r}")
        severity = body["severity"]
        if isinstance(severity, bool) or not isinstance(severity, int):
            raise ValidationError("severity must be an integer in 1..5")
        report = self.server.telemetry.submit_smell_report(
            severity=severity,
            t=timelapse.parse_utc(str(body["t"])),
            note=(str(body["note"]) if body.get("note") is not None else None),
        )
        return _json_response(200, telemetry.smell_to_json(report))
