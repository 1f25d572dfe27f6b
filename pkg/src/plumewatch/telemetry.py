"""PM2.5 readings, wind readings, and smell reports.

Backed by sqlite so readings survive service restarts and concurrent station
uploads stay safe; every write commits before the caller gets its ack.
Timestamps are stored as whole UTC epoch seconds. Wind direction uses the
meteorological convention (degrees the wind comes FROM); converting to an
arrow that points downwind is the renderer's job.
"""

from __future__ import annotations

import csv
import math
import sqlite3
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import NotFoundError, ValidationError
from .timelapse import iso_utc, parse_utc

CITIZEN_CADENCE_S = 60
GOVERNMENT_CADENCE_S = 3600
WIND_MATCH_WINDOW_S = 15 * 60
SMELL_MATCH_WINDOW_S = 30 * 60

READINGS_CSV_HEADER = ["t_iso", "station_id", "pm25"]
WIND_CSV_HEADER = ["t_iso", "speed_ms", "direction_deg"]
STATIONS_CSV_HEADER = ["station_id", "display_name", "latitude", "longitude", "cadence"]


def _epoch(t: datetime | str) -> int:
    if isinstance(t, str):
        t = parse_utc(t)
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return int(round(t.timestamp()))


def _dt(epoch: int) -> datetime:
    return datetime.fromtimestamp(epoch, tz=timezone.utc)


@dataclass(frozen=True)
class Station:
    station_id: str
    display_name: str
    latitude: float
    longitude: float
    cadence: int = CITIZEN_CADENCE_S

    def validate(self) -> None:
        if not self.station_id:
            raise ValidationError("station_id must be non-empty")
        if not -90 <= self.latitude <= 90:
            raise ValidationError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180 <= self.longitude <= 180:
            raise ValidationError(f"longitude {self.longitude} outside [-180, 180]")
        if self.cadence <= 0:
            raise ValidationError("cadence must be positive seconds")


@dataclass(frozen=True)
class SensorReading:
    station_id: str
    t: datetime
    pm25: float

    def validate(self) -> None:
        if not (math.isfinite(self.pm25) and self.pm25 >= 0):
            raise ValidationError(f"pm25 must be finite and >= 0, got {self.pm25}")


@dataclass(frozen=True)
class WindReading:
    t: datetime
    speed: float
    direction: float  # degrees FROM which the wind blows

    def validate(self) -> None:
        if not (math.isfinite(self.speed) and self.speed >= 0):
            raise ValidationError(f"wind speed must be finite and >= 0, got {self.speed}")
        if not (math.isfinite(self.direction) and 0 <= self.direction < 360):
            raise ValidationError(f"wind direction {self.direction} outside [0, 360)")


@dataclass(frozen=True)
class SmellReport:
    report_id: int
    t: datetime
    severity: int
    note: str | None = None


@dataclass(frozen=True)
class SeriesBucket:
    bucket_start: datetime
    mean: float | None
    count: int


@dataclass(frozen=True)
class ContextSnapshot:
    wind: WindReading | None
    smell_reports: tuple[SmellReport, ...]
    latest_readings: dict[str, SensorReading]


_SCHEMA = """
CREATE TABLE IF NOT EXISTS stations (
  station_id TEXT PRIMARY KEY,
  display_name TEXT NOT NULL,
  latitude REAL NOT NULL,
  longitude REAL NOT NULL,
  cadence INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS readings (
  station_id TEXT NOT NULL,
  t INTEGER NOT NULL,
  pm25 REAL NOT NULL,
  PRIMARY KEY (station_id, t)
);
CREATE TABLE IF NOT EXISTS wind (
  t INTEGER PRIMARY KEY,
  speed REAL NOT NULL,
  direction REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS smell (
  report_id INTEGER PRIMARY KEY AUTOINCREMENT,
  t INTEGER NOT NULL,
  severity INTEGER NOT NULL,
  note TEXT
);
"""


class TelemetryStore:
    """Single-file telemetry database; safe for many writer threads."""

    def __init__(self, path: Path | str):
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._lock = threading.Lock()
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    # -- stations ----------------------------------------------------------

    def register_station(self, station: Station) -> None:
        station.validate()
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO stations VALUES (?, ?, ?, ?, ?)",
                (station.station_id, station.display_name, station.latitude,
                 station.longitude, station.cadence),
            )
            self._conn.commit()

    def get_station(self, station_id: str) -> Station:
        with self._lock:
            row = self._conn.execute(
                "SELECT station_id, display_name, latitude, longitude, cadence "
                "FROM stations WHERE station_id = ?", (station_id,)
            ).fetchone()
        if row is None:
            raise NotFoundError(f"unknown station {station_id!r}")
        return Station(*row)

    def list_stations(self) -> list[Station]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT station_id, display_name, latitude, longitude, cadence "
                "FROM stations ORDER BY station_id"
            ).fetchall()
        return [Station(*row) for row in rows]

    def sync_stations_csv(self, path: Path) -> int:
        """Load/refresh stations from a registry CSV; returns rows applied."""
        count = 0
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != STATIONS_CSV_HEADER:
                raise ValidationError(
                    f"stations CSV must start with header {','.join(STATIONS_CSV_HEADER)}"
                )
            for row in reader:
                if not row:
                    continue
                self.register_station(Station(
                    station_id=row[0], display_name=row[1],
                    latitude=float(row[2]), longitude=float(row[3]), cadence=int(row[4]),
                ))
                count += 1
        return count

    # -- ingest --------------------------------------------------------------

    def ingest_reading(self, reading: SensorReading) -> None:
        """Persist one reading; duplicate (station, t) is replaced."""
        reading.validate()
        self.get_station(reading.station_id)
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO readings VALUES (?, ?, ?)",
                (reading.station_id, _epoch(reading.t), float(reading.pm25)),
            )
            self._conn.commit()

    def ingest_wind(self, reading: WindReading) -> None:
        reading.validate()
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO wind VALUES (?, ?, ?)",
                (_epoch(reading.t), float(reading.speed), float(reading.direction)),
            )
            self._conn.commit()

    def submit_smell_report(
        self, severity: int, t: datetime, note: str | None = None
    ) -> SmellReport:
        if not (isinstance(severity, int) and 1 <= severity <= 5):
            raise ValidationError(f"severity must be an integer in 1..5, got {severity!r}")
        with self._lock:
            cur = self._conn.execute(
                "INSERT INTO smell (t, severity, note) VALUES (?, ?, ?)",
                (_epoch(t), severity, note),
            )
            self._conn.commit()
        return SmellReport(cur.lastrowid, _dt(_epoch(t)), severity, note)

    def import_readings_csv(self, path: Path) -> int:
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != READINGS_CSV_HEADER:
                raise ValidationError(
                    f"readings CSV must start with header {','.join(READINGS_CSV_HEADER)}"
                )
            count = 0
            for row in reader:
                if not row:
                    continue
                self.ingest_reading(SensorReading(
                    station_id=row[1], t=parse_utc(row[0]), pm25=float(row[2])
                ))
                count += 1
        return count

    def import_wind_csv(self, path: Path) -> int:
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != WIND_CSV_HEADER:
                raise ValidationError(
                    f"wind CSV must start with header {','.join(WIND_CSV_HEADER)}"
                )
            count = 0
            for row in reader:
                if not row:
                    continue
                self.ingest_wind(WindReading(
                    t=parse_utc(row[0]), speed=float(row[1]), direction=float(row[2])
                ))
                count += 1
        return count

    # -- queries --------------------------------------------------------------

    def query_series(
        self, station_ids: list[str], t0: datetime, t1: datetime, bucket: int
    ) -> dict[str, list[SeriesBucket]]:
        """Bucketed arithmetic means per station over [t0, t1).

        Buckets are [t0 + k*bucket, t0 + (k+1)*bucket); empty buckets are
        emitted with count 0 and no mean.
        """
        e0, e1 = _epoch(t0), _epoch(t1)
        if e0 >= e1:
            raise ValidationError("t0 must be earlier than t1")
        if bucket < 1:
            raise ValidationError("bucket must be >= 1 second")
        n_buckets = -(-(e1 - e0) // bucket)
        out: dict[str, list[SeriesBucket]] = {}
        for station_id in station_ids:
            self.get_station(station_id)
            with self._lock:
                rows = self._conn.execute(
                    "SELECT t, pm25 FROM readings WHERE station_id = ? AND t >= ? AND t < ?",
                    (station_id, e0, e1),
                ).fetchall()
            sums = [0.0] * n_buckets
            counts = [0] * n_buckets
            for t, pm25 in rows:
                k = (t - e0) // bucket
                sums[k] += pm25
                counts[k] += 1
            out[station_id] = [
                SeriesBucket(
                    bucket_start=_dt(e0 + k * bucket),
                    mean=(sums[k] / counts[k]) if counts[k] else None,
                    count=counts[k],
                )
                for k in range(n_buckets)
            ]
        return out

    def query_context(self, t: datetime) -> ContextSnapshot:
        """Map snapshot around t: nearest wind, nearby smell, fresh readings.

        Nearest-in-time selection is deterministic; ties go to the earlier
        timestamp. Station readings are the latest at or before t that are
        no staler than twice the station cadence.
        """
        e = _epoch(t)
        with self._lock:
            wind_row = self._conn.execute(
                "SELECT t, speed, direction FROM wind WHERE t BETWEEN ? AND ? "
                "ORDER BY ABS(t - ?) ASC, t ASC LIMIT 1",
                (e - WIND_MATCH_WINDOW_S, e + WIND_MATCH_WINDOW_S, e),
            ).fetchone()
            smell_rows = self._conn.execute(
                "SELECT report_id, t, severity, note FROM smell "
                "WHERE t BETWEEN ? AND ? ORDER BY t ASC, report_id ASC",
                (e - SMELL_MATCH_WINDOW_S, e + SMELL_MATCH_WINDOW_S),
            ).fetchall()
            stations = self._conn.execute(
                "SELECT station_id, cadence FROM stations"
            ).fetchall()
            latest: dict[str, SensorReading] = {}
            for station_id, cadence in stations:
                row = self._conn.execute(
                    "SELECT t, pm25 FROM readings WHERE station_id = ? AND t <= ? AND t >= ? "
                    "ORDER BY t DESC LIMIT 1",
                    (station_id, e, e - 2 * cadence),
                ).fetchone()
                if row is not None:
                    latest[station_id] = SensorReading(station_id, _dt(row[0]), row[1])
        wind = WindReading(_dt(wind_row[0]), wind_row[1], wind_row[2]) if wind_row else None
        smells = tuple(SmellReport(r[0], _dt(r[1]), r[2], r[3]) for r in smell_rows)
        return ContextSnapshot(wind=wind, smell_reports=smells, latest_readings=latest)

    def count_readings(self, station_id: str, t0: datetime, t1: datetime) -> int:
        with self._lock:
            row = self._conn.execute(
                "SELECT COUNT(*) FROM readings WHERE station_id = ? AND t >= ? AND t < ?",
                (station_id, _epoch(t0), _epoch(t1)),
            ).fetchone()
        return int(row[0])


def reading_to_json(r: SensorReading) -> dict:
    return {"station_id": r.station_id, "t": iso_utc(r.t), "pm25": r.pm25}


def wind_to_json(w: WindReading) -> dict:
    return {"t": iso_utc(w.t), "speed": w.speed, "direction": w.direction}


def smell_to_json(s: SmellReport) -> dict:
    return {"report_id": s.report_id, "t": iso_utc(s.t), "severity": s.severity, "note": s.note}
