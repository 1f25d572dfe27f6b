import assert from "node:assert/strict";
import { test } from "node:test";

import {
  ChartGeometry, isFresh, makeCursor, moveCursor, nearestPoint, timeToX, xToTimeMs,
} from "../src/charts.js";

test("stale responses are discarded by sequence number", () => {
  let cursor = makeCursor(0);
  const first = (cursor = moveCursor(cursor, 1000)).seq;
  const second = (cursor = moveCursor(cursor, 2000)).seq;
  assert.equal(isFresh(cursor, first), false); // slow reply from the older click
  assert.equal(isFresh(cursor, second), true);
});

const GEOM: ChartGeometry = { t0Ms: 0, t1Ms: 10_000, width: 500, height: 100, vMax: 50 };

test("time/x transforms are inverse", () => {
  for (const t of [0, 1234, 9999]) {
    assert.ok(Math.abs(xToTimeMs(GEOM, timeToX(GEOM, t)) - t) < 1e-6);
  }
});

test("nearest point picks the closest, earlier on ties", () => {
  const points = [
    { timeMs: 1000, value: 1 },
    { timeMs: 3000, value: 2 },
    { timeMs: 5000, value: 3 },
  ];
  assert.equal(nearestPoint(GEOM, points, timeToX(GEOM, 2800))?.timeMs, 3000);
  assert.equal(nearestPoint(GEOM, points, timeToX(GEOM, 2000))?.timeMs, 1000); // tie
  assert.equal(nearestPoint(GEOM, [], 10), null);
});
