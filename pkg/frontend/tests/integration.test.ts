/** Round trips against a real backend spawned from the sibling package.
 *
 * Requires python3 with plumewatch importable (pip install -e .. or the
 * checkout's src/ on the path); skips with a clear message otherwise.
 */

import assert from "node:assert/strict";
import { after, before, test } from "node:test";
import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { ApiClient } from "../src/api.js";
import { decodeClip } from "../src/clip.js";
import { galleryItems } from "../src/gallery.js";
import { buildSpec, shareThumbnail } from "../src/thumbnailTool.js";
import { DatasetInfo } from "../src/types.js";
import { decodeThumbnailUrl } from "../src/urls.js";
import { initialState, seekFromChart } from "../src/viewer.js";

const REPO_SRC = resolve(import.meta.dirname, "../../src");

const FIXTURE_SCRIPT = `
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

sys.path.insert(0, ${JSON.stringify(REPO_SRC)})
import numpy as np
from PIL import Image

from plumewatch.smoke import SmokeParams, run_detection
from plumewatch.storage import DataStore
from plumewatch.telemetry import SensorReading, TelemetryStore, WindReading
from plumewatch.timelapse import build_pyramid, ingest_frames

root = Path(sys.argv[1])
store = DataStore(root)
src = root / "_src"
src.mkdir(parents=True)
start = datetime(2015, 8, 3, 12, 0, 0, tzinfo=timezone.utc)
for k in range(12):
    frame = np.full((48, 64, 3), 70, dtype=np.uint8)
    if 6 <= k <= 9:
        frame[10:40, 20:50] = (230, 219, 219)
    name = (start + timedelta(seconds=5 * k)).strftime("%Y%m%dT%H%M%SZ") + ".png"
    Image.fromarray(frame).save(src / name)
ingest_frames(store, "day1", src)
build_pyramid(store, "day1", tile_size=32)
run_detection(store, "day1", SmokeParams(
    bg_window=8, event_threshold=400, min_event_frames=3, merge_gap=2,
))
store.stations_csv().write_text(
    "station_id,display_name,latitude,longitude,cadence\\ns1,North,40.4,-79.9,60\\n"
)
telemetry = TelemetryStore(store.telemetry_db())
telemetry.sync_stations_csv(store.stations_csv())
telemetry.ingest_reading(SensorReading("s1", start + timedelta(seconds=30), 33.0))
telemetry.ingest_wind(WindReading(start, 3.0, 90.0))
telemetry.submit_smell_report(4, start + timedelta(seconds=37), "integration fixture")
telemetry.close()
print("fixture ready")
`;

let dataRoot: string;
let server: ChildProcess | null = null;
let api: ApiClient;
let dataset: DatasetInfo;

before(async () => {
  dataRoot = mkdtempSync(join(tmpdir(), "plumewatch-ui-"));
  const fixture = spawnSync("python3", ["-", dataRoot], {
    input: FIXTURE_SCRIPT,
    encoding: "utf-8",
  });
  assert.equal(
    fixture.status, 0,
    `fixture build failed:\n${fixture.stdout}\n${fixture.stderr}`,
  );

  server = spawn("python3", [
    "-c",
    `import sys; sys.path.insert(0, ${JSON.stringify(REPO_SRC)}); ` +
      "from plumewatch.cli import console_main; console_main()",
    "serve", "--data-root", dataRoot, "--port", "0",
  ]);
  const port = await new Promise<number>((resolvePort, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error(`server never started: ${buffer}`)), 15000);
    server!.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const m = buffer.match(/http:\/\/[\d.]+:(\d+)\//);
      if (m) {
        clearTimeout(timer);
        resolvePort(parseInt(m[1]!, 10));
      }
    });
    server!.stderr!.on("data", (chunk: Buffer) => (buffer += chunk.toString()));
    server!.on("exit", (code) => reject(new Error(`server exited ${code}: ${buffer}`)));
  });
  api = new ApiClient(`http://127.0.0.1:${port}`);
  const datasets = await api.datasets();
  assert.equal(datasets.length, 1);
  dataset = datasets[0]!;
});

after(() => {
  server?.kill();
  rmSync(dataRoot, { recursive: true, force: true });
});

test("drawn box round trip: POST -> URL decodes to the same box", async () => {
  const state = initialState(dataset);
  const box = { left: 3, top: 5, right: 41, bottom: 29 };
  const request = buildSpec(state, dataset, box, 1, 4);
  assert.equal(request.clientError, null);
  const result = await shareThumbnail(api, request);
  assert.equal(result.error, null);
  const decoded = decodeThumbnailUrl(result.url!);
  assert.deepEqual(decoded.bounds, [3, 5, 41, 29]);
  assert.equal(decoded.origin, "human");
  assert.deepEqual(decoded, request.spec);
  // and the backend will actually serve it
  const image = await fetch(api.baseUrl + result.url!);
  assert.equal(image.status, 200);
  assert.equal(image.headers.get("content-type"), "image/gif");
  const head = new Uint8Array(await image.arrayBuffer()).slice(0, 6);
  assert.equal(String.fromCharCode(...head), "GIF89a");
});

test("degenerate box is rejected client-side, nothing sent", async () => {
  const state = initialState(dataset);
  const request = buildSpec(state, dataset, { left: 9, top: 4, right: 9, bottom: 30 }, 0, 2);
  assert.match(request.clientError ?? "", /box/);
  const result = await shareThumbnail(api, request);
  assert.equal(result.url, null);
});

test("server-side 400 text is surfaced verbatim", async () => {
  const state = initialState(dataset);
  const request = buildSpec(state, dataset, { left: 0, top: 0, right: 30, bottom: 20 }, 0, 2);
  request.spec.nframes = 999; // past the end of the dataset
  request.clientError = null;
  const result = await shareThumbnail(api, request);
  assert.equal(result.url, null);
  assert.match(result.error ?? "", /exceed/);
});

test("chart click at the smell report time seeks the viewer to its frame", async () => {
  const context = await api.context("2015-08-03T12:00:37Z");
  assert.equal(context.smell_reports.length, 1);
  const report = context.smell_reports[0]!;
  assert.equal(report.severity, 4);

  const lookup = await api.frameIndexAt(dataset.id, report.t);
  assert.equal(lookup.frame_index, 7); // 37 s past start at 5 s cadence

  const seek = seekFromChart(
    { ...initialState(dataset), playing: true },
    dataset, report.t, lookup.frame_index,
  );
  assert.equal(seek.state.currentFrame, 7);
  assert.equal(seek.state.playing, false);
  assert.equal(seek.notice, null);
});

test("clicks outside the dataset snap to an end with a notice", async () => {
  const early = "2015-08-03T09:00:00Z";
  const lookup = await api.frameIndexAt(dataset.id, early);
  assert.equal(lookup.frame_index, 0);
  const seek = seekFromChart(initialState(dataset), dataset, early, lookup.frame_index);
  assert.equal(seek.state.currentFrame, 0);
  assert.match(seek.notice ?? "", /first frame/);
});

test("tile clips decode in the client", async () => {
  const buffer = await api.tileClip(dataset.id, (dataset.num_levels ?? 1) - 1, 0, 0, 0, 3);
  const clip = await decodeClip(buffer);
  assert.equal(clip.width, dataset.tile_size);
  assert.equal(clip.height, dataset.tile_size);
  assert.equal(clip.frames.length, 3);
  assert.equal(clip.frames[0]!.length, 32 * 32 * 3);
  // fixture background is uniform 70-gray at the top-left corner
  assert.deepEqual(Array.from(clip.frames[0]!.slice(0, 3)), [70, 70, 70]);
});

test("gallery lists detector events with shareable algorithm links", async () => {
  const smoke = await api.smoke(dataset.id);
  assert.ok(smoke.events.length >= 1);
  const items = galleryItems(smoke, api.baseUrl, dataset.start_time, dataset.capture_interval_s);
  const first = items[0]!;
  assert.match(first.shareLink, /origin=algorithm/);
  const decoded = decodeThumbnailUrl(first.event.url);
  assert.equal(decoded.origin, "algorithm");
  const image = await fetch(first.shareLink);
  assert.equal(image.status, 200);
  assert.equal(image.headers.get("content-type"), "image/gif");
});

test("pm2.5 series and wind context feed the charts and map", async () => {
  const series = await api.series(["s1"], dataset.start_time, dataset.end_time, 60);
  const buckets = series.series["s1"]!;
  assert.equal(buckets.reduce((n, b) => n + b.count, 0), 1);
  const context = await api.context(dataset.start_time);
  assert.equal(context.wind?.direction, 90);
  assert.equal(context.latest_readings["s1"], undefined); // reading is 30 s in the future
});
