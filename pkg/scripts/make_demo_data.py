#!/usr/bin/env python3
"""Build a self-contained demo data root: one synthetic plume dataset,
two sensor stations with a day of readings, wind, and smell reports.

Usage:
    python3 scripts/make_demo_data.py [dest_dir]

Then:
    plumewatch tile   --dataset plumeday --data-root <dest>
    plumewatch detect --dataset plumeday --params <dest>/smoke.params --data-root <dest>
    plumewatch serve  --data-root <dest> --port 8080
"""

import math
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
from PIL import Image

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from plumewatch.storage import DataStore
from plumewatch.telemetry import SensorReading, Station, TelemetryStore, WindReading
from plumewatch.timelapse import ingest_frames

WIDTH, HEIGHT = 640, 360
N_FRAMES = 150
START = datetime(2015, 8, 3, 13, 0, 0, tzinfo=timezone.utc)
PLUME_FRAMES = range(60, 120)


def scene_frame(k: int) -> np.ndarray:
    frame = np.zeros((HEIGHT, WIDTH, 3), dtype=np.uint8)
    sky = np.linspace(120, 170, HEIGHT // 2, dtype=np.uint8)
    frame[: HEIGHT // 2] = sky[:, None, None]
    frame[HEIGHT // 2:] = (64, 70, 62)  # ground
    frame[200:280, 430:470] = (55, 50, 48)  # the stack
    if k in PLUME_FRAMES:
        age = k - PLUME_FRAMES.start
        cx, cy = 450 - 2 * age, max(60, 190 - 3 * age)
        radius = 18 + age
        yy, xx = np.mgrid[0:HEIGHT, 0:WIDTH]
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
        frame[mask] = (226, 222, 220)  # light, low-saturation plume
    return frame


def main() -> int:
    dest = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-data")
    dest.mkdir(parents=True, exist_ok=True)
    store = DataStore(dest)

    frames_src = dest / "_frames_src"
    frames_src.mkdir(exist_ok=True)
    for k in range(N_FRAMES):
        t = START + timedelta(seconds=5 * k)
        name = t.strftime("%Y%m%dT%H%M%SZ") + ".jpg"
        Image.fromarray(scene_frame(k)).save(frames_src / name, quality=90)
    dataset = ingest_frames(store, "plumeday", frames_src)
    print(f"ingested {dataset.frame_count} frames as 'plumeday'")

    store.stations_csv().write_text(
        "station_id,display_name,latitude,longitude,cadence\n"
        "north,Community north,40.392,-79.852,60\n"
        "county,Health department,40.305,-79.876,3600\n"
    )
    telemetry = TelemetryStore(store.telemetry_db())
    telemetry.sync_stations_csv(store.stations_csv())

    for minute in range(0, N_FRAMES * 5 // 60 + 60):
        t = START + timedelta(minutes=minute)
        plume_boost = 60.0 if 5 <= minute <= 12 else 0.0
        pm = 18 + 6 * math.sin(minute / 9) + plume_boost
        telemetry.ingest_reading(SensorReading("north", t, round(pm, 1)))
        if minute % 60 == 0:
            telemetry.ingest_reading(SensorReading("county", t, round(pm * 0.7, 1)))
        if minute % 10 == 0:
            telemetry.ingest_wind(WindReading(t, 2.0 + minute % 7 / 3, (300 + minute) % 360))
    for minute, severity in ((6, 4), (9, 5), (40, 2)):
        telemetry.submit_smell_report(
            severity, START + timedelta(minutes=minute), note="demo report"
        )
    telemetry.close()

    (dest / "smoke.params").write_text(
        "bg_window = 55\n"
        "event_threshold = 600\n"
        "min_event_frames = 3\n"
        "merge_gap = 12\n"
    )
    config_lines = [
        'listen = "127.0.0.1:8080"',
        f'data_root = "{dest.resolve()}"',
        'study_tz = "America/New_York"',
        "thumbnail_rate_limit = 20",
    ]
    ui_dir = Path(__file__).resolve().parent.parent / "frontend"
    if ui_dir.is_dir():
        config_lines.append(f'ui_dir = "{ui_dir}"')
    (dest / "plumewatch.toml").write_text("\n".join(config_lines) + "\n")
    print(f"demo data root ready at {dest.resolve()}")
    print("next:")
    print(f"  plumewatch tile   --dataset plumeday --data-root {dest}")
    print(f"  plumewatch detect --dataset plumeday --params {dest / 'smoke.params'} --data-root {dest}")
    print(f"  plumewatch serve  --config {dest / 'plumewatch.toml'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
