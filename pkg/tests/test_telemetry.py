"""Telemetry ingest, bucketed series queries, and context snapshots."""

import random
from datetime import datetime, timedelta, timezone

import pytest

from plumewatch.errors import NotFoundError, ValidationError
from plumewatch.telemetry import (
    SensorReading,
    SmellReport,
    Station,
    TelemetryStore,
    WindReading,
)

from oracles import bucket_means

T0 = datetime(2015, 8, 3, 12, 0, 0, tzinfo=timezone.utc)
S1 = Station("s1", "Community north", 40.39, -79.85, cadence=60)
S2 = Station("s2", "Health dept", 40.38, -79.86, cadence=3600)


@pytest.fixture
def tstore(tmp_path):
    ts = TelemetryStore(tmp_path / "telemetry.db")
    ts.register_station(S1)
    ts.register_station(S2)
    yield ts
    ts.close()


def at(seconds):
    return T0 + timedelta(seconds=seconds)


# --- ingest -------------------------------------------------------------------


def test_ingest_and_replace(tstore):
    tstore.ingest_reading(SensorReading("s1", at(0), 35.2))
    tstore.ingest_reading(SensorReading("s1", at(0), 36.0))  # last write wins
    series = tstore.query_series(["s1"], at(0), at(60), 60)
    [bucket] = series["s1"]
    assert bucket.mean == 36.0 and bucket.count == 1


def test_ingest_unknown_station(tstore):
    with pytest.raises(NotFoundError):
        tstore.ingest_reading(SensorReading("ghost", at(0), 1.0))


@pytest.mark.parametrize("bad", [-1.0, float("nan"), float("inf")])
def test_ingest_rejects_bad_pm25(tstore, bad):
    with pytest.raises(ValidationError):
        tstore.ingest_reading(SensorReading("s1", at(0), bad))


def test_ingest_idempotent_replay(tstore):
    for _ in range(3):
        tstore.ingest_reading(SensorReading("s1", at(60), 12.5))
    assert tstore.count_readings("s1", at(0), at(3600)) == 1


def test_wind_validation(tstore):
    tstore.ingest_wind(WindReading(at(0), 3.5, 359.9))
    with pytest.raises(ValidationError):
        tstore.ingest_wind(WindReading(at(0), -1.0, 0.0))
    with pytest.raises(ValidationError):
        tstore.ingest_wind(WindReading(at(0), 1.0, 360.0))


def test_smell_report_bounds(tstore):
    report = tstore.submit_smell_report(5, at(0))
    assert report.severity == 5 and report.report_id >= 1
    kept = tstore.submit_smell_report(3, at(10), note="sulfur smell, windows closed")
    assert kept.note == "sulfur smell, windows closed"
    for bad in (0, 6):
        with pytest.raises(ValidationError):
            tstore.submit_smell_report(bad, at(0))
    snapshot = tstore.query_context(at(0))
    assert all(1 <= s.severity <= 5 for s in snapshot.smell_reports)


def test_station_validation():
    with pytest.raises(ValidationError):
        Station("x", "bad", 91.0, 0.0).validate()
    with pytest.raises(ValidationError):
        Station("x", "bad", 0.0, -181.0).validate()


# --- query_series ----------------------------------------------------------------


def test_series_one_hour_bucket(tstore):
    for minute, pm in ((0, 10), (20, 20), (40, 30)):
        tstore.ingest_reading(SensorReading("s1", at(60 * minute), pm))
    [bucket] = tstore.query_series(["s1"], at(0), at(3600), 3600)["s1"]
    assert bucket.mean == 20.0 and bucket.count == 3


def test_series_empty_range(tstore):
    buckets = tstore.query_series(["s1"], at(0), at(600), 60)["s1"]
    assert len(buckets) == 10
    assert all(b.count == 0 and b.mean is None for b in buckets)


def test_series_validates_inputs(tstore):
    with pytest.raises(ValidationError):
        tstore.query_series(["s1"], at(100), at(100), 60)
    with pytest.raises(ValidationError):
        tstore.query_series(["s1"], at(0), at(100), 0)
    with pytest.raises(NotFoundError):
        tstore.query_series(["ghost"], at(0), at(100), 60)


def test_series_matches_bruteforce_oracle(tstore):
    rng = random.Random(7)
    epochs = rng.sample(range(0, 7200), 300)
    readings = [(s, round(rng.uniform(0, 80), 1)) for s in epochs]
    for s, pm in readings:
        tstore.ingest_reading(SensorReading("s1", at(s), pm))
    for bucket_s, lo, hi in ((60, 0, 7200), (97, 500, 6500), (3600, 0, 7200)):
        got = tstore.query_series(["s1"], at(lo), at(hi), bucket_s)["s1"]
        t0e = int(at(lo).timestamp())
        t1e = int(at(hi).timestamp())
        expected = bucket_means(
            [(int(at(s).timestamp()), pm) for s, pm in readings], t0e, t1e, bucket_s
        )
        assert len(got) == len(expected)
        for bucket, (start, mean, count) in zip(got, expected):
            assert int(bucket.bucket_start.timestamp()) == start
            assert bucket.count == count
            if mean is None:
                assert bucket.mean is None
            else:
                assert bucket.mean == pytest.approx(mean, abs=1e-9)


def test_series_count_conservation(tstore):
    rng = random.Random(11)
    epochs = rng.sample(range(0, 5000), 200)
    for s in epochs:
        tstore.ingest_reading(SensorReading("s1", at(s), 1.0))
    buckets = tstore.query_series(["s1"], at(0), at(5000), 77)["s1"]
    in_range = sum(1 for s in epochs if 0 <= s < 5000)
    assert sum(b.count for b in buckets) == in_range == tstore.count_readings(
        "s1", at(0), at(5000)
    )


# --- query_context -----------------------------------------------------------------


def test_context_nearest_wind(tstore):
    tstore.ingest_wind(WindReading(at(0), 2.0, 90.0))
    tstore.ingest_wind(WindReading(at(600), 4.0, 180.0))
    snapshot = tstore.query_context(at(240))
    assert snapshot.wind.speed == 2.0  # 12:04 is nearer to 12:00


def test_context_no_wind_within_window(tstore):
    tstore.ingest_wind(WindReading(at(0), 2.0, 90.0))
    assert tstore.query_context(at(16 * 60)).wind is None


def test_context_wind_tie_breaks_earlier(tstore):
    tstore.ingest_wind(WindReading(at(0), 1.0, 10.0))
    tstore.ingest_wind(WindReading(at(200), 2.0, 20.0))
    snapshot = tstore.query_context(at(100))
    assert snapshot.wind.speed == 1.0


def test_context_smell_window(tstore):
    tstore.submit_smell_report(2, at(-31 * 60))
    kept = tstore.submit_smell_report(4, at(-10 * 60))
    tstore.submit_smell_report(3, at(29 * 60))
    snapshot = tstore.query_context(at(0))
    assert [s.severity for s in snapshot.smell_reports] == [4, 3]
    assert isinstance(kept, SmellReport)


def test_context_latest_readings_respect_cadence(tstore):
    tstore.ingest_reading(SensorReading("s1", at(-50), 10.0))  # within 2x60s
    tstore.ingest_reading(SensorReading("s2", at(-7000), 40.0))  # within 2x3600
    snapshot = tstore.query_context(at(0))
    assert snapshot.latest_readings["s1"].pm25 == 10.0
    assert snapshot.latest_readings["s2"].pm25 == 40.0
    # stale for s1: > 120 s old
    snapshot = tstore.query_context(at(200))
    assert "s1" not in snapshot.latest_readings
    assert "s2" in snapshot.latest_readings


def test_context_reading_after_t_ignored(tstore):
    tstore.ingest_reading(SensorReading("s1", at(50), 10.0))
    assert "s1" not in tstore.query_context(at(0)).latest_readings


# --- CSV import + durability ----------------------------------------------------------


def test_csv_imports(tstore, tmp_path):
    readings = tmp_path / "readings.csv"
    readings.write_text(
        "t_iso,station_id,pm25\n"
        "2015-08-03T12:00:00Z,s1,35.2\n"
        "2015-08-03T12:01:00Z,s1,36.1\n"
        "2015-08-03T12:00:00Z,s2,12.0\n"
    )
    assert tstore.import_readings_csv(readings) == 3
    wind = tmp_path / "wind.csv"
    wind.write_text("t_iso,speed_ms,direction_deg\n2015-08-03T12:00:00Z,3.2,270\n")
    assert tstore.import_wind_csv(wind) == 1
    assert tstore.query_context(at(30)).wind.direction == 270.0


def test_csv_requires_exact_header(tstore, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,station,value\n2015-08-03T12:00:00Z,s1,1\n")
    with pytest.raises(ValidationError):
        tstore.import_readings_csv(bad)


def test_stations_csv_sync(tmp_path):
    ts = TelemetryStore(tmp_path / "t.db")
    csv_path = tmp_path / "stations.csv"
    csv_path.write_text(
        "station_id,display_name,latitude,longitude,cadence\n"
        "n1,North,40.4,-79.9,60\n"
        "gov,County,40.3,-79.8,3600\n"
    )
    assert ts.sync_stations_csv(csv_path) == 2
    assert [s.station_id for s in ts.list_stations()] == ["gov", "n1"]
    ts.close()


def test_reopen_keeps_data(tmp_path):
    path = tmp_path / "t.db"
    ts = TelemetryStore(path)
    ts.register_station(S1)
    ts.ingest_reading(SensorReading("s1", at(0), 9.0))
    ts.close()
    again = TelemetryStore(path)
    assert again.count_readings("s1", at(0), at(60)) == 1
    again.close()


def test_concurrent_ingest(tstore):
    import threading

    def work(offset):
        for k in range(50):
            tstore.ingest_reading(SensorReading("s1", at(offset + k), 1.0))

    threads = [threading.Thread(target=work, args=(1000 * i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert tstore.count_readings("s1", at(0), at(10000)) == 200
