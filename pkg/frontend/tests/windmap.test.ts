import assert from "node:assert/strict";
import { test } from "node:test";

import { ContextData } from "../src/types.js";
import { arrowFor, barsFor, PX_PER_MS, stationColor } from "../src/windmap.js";

function contextWithWind(direction: number, speed = 3): ContextData {
  return {
    wind: { t: "2015-08-03T12:00:00Z", speed, direction },
    smell_reports: [],
    latest_readings: {},
  };
}

test("meteorological convention: arrow points downwind", () => {
  // north wind (0 deg, coming FROM the north) blows toward the south
  assert.equal(arrowFor(contextWithWind(0)).angleDeg, 180);
  assert.equal(arrowFor(contextWithWind(90)).angleDeg, 270); // east wind -> west
  assert.equal(arrowFor(contextWithWind(180)).angleDeg, 0); // south wind -> north
  assert.equal(arrowFor(contextWithWind(270)).angleDeg, 90); // west wind -> east
});

test("arrow length proportional to speed; zero speed hides it", () => {
  assert.equal(arrowFor(contextWithWind(0, 2)).lengthPx, 2 * PX_PER_MS);
  assert.equal(arrowFor(contextWithWind(0, 4)).lengthPx, 4 * PX_PER_MS);
  assert.equal(arrowFor(contextWithWind(0, 0)).visible, false);
});

test("missing wind hides the arrow", () => {
  const context: ContextData = { wind: null, smell_reports: [], latest_readings: {} };
  assert.equal(arrowFor(context).visible, false);
});

test("bar heights proportional to latest pm2.5", () => {
  const context: ContextData = {
    wind: null,
    smell_reports: [],
    latest_readings: {
      a: { station_id: "a", t: "2015-08-03T12:00:00Z", pm25: 10 },
      b: { station_id: "b", t: "2015-08-03T12:00:00Z", pm25: 20 },
    },
  };
  const bars = barsFor(context, ["a", "b"]);
  assert.equal(bars[1]!.heightPx / bars[0]!.heightPx, 2);
});

test("station colors are deterministic by registration order", () => {
  const context: ContextData = { wind: null, smell_reports: [], latest_readings: {} };
  const bars = barsFor(context, ["n1", "n2", "n3"]);
  assert.deepEqual(
    bars.map((b) => b.color),
    [stationColor(0), stationColor(1), stationColor(2)],
  );
  assert.equal(bars[0]!.heightPx, 0); // no reading keeps the slot at zero
});
