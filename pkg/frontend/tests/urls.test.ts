import assert from "node:assert/strict";
import { test } from "node:test";

import { ThumbnailSpec } from "../src/types.js";
import { decodeThumbnailUrl, encodeThumbnailUrl, validateSpec } from "../src/urls.js";

const SPEC: ThumbnailSpec = {
  dataset_id: "ds1",
  bounds: [0, 0, 100, 100],
  out_width: 100,
  out_height: 100,
  start_frame: 0,
  nframes: 10,
  fps: 12,
  format: "gif",
  origin: "human",
};

test("encode emits the canonical parameter order", () => {
  assert.equal(
    encodeThumbnailUrl(SPEC),
    "/thumbnail?root=ds1&boundsLTRB=0,0,100,100&width=100&height=100" +
      "&startFrame=0&nframes=10&fps=12&format=gif&origin=human",
  );
});

test("decode inverts encode", () => {
  assert.deepEqual(decodeThumbnailUrl(encodeThumbnailUrl(SPEC)), SPEC);
});

test("decode round trip over random specs", () => {
  let seed = 12345;
  const rand = (n: number) => {
    seed = (seed * 1103515245 + 12345) & 0x7fffffff;
    return seed % n;
  };
  for (let i = 0; i < 500; i++) {
    const left = rand(2000);
    const top = rand(1000);
    const spec: ThumbnailSpec = {
      dataset_id: `cam-${rand(9)}`,
      bounds: [left, top, left + 1 + rand(500), top + 1 + rand(400)],
      out_width: 1 + rand(640),
      out_height: 1 + rand(480),
      start_frame: rand(20000),
      nframes: 1 + rand(240),
      fps: 1 + rand(60),
      format: rand(2) ? "gif" : "mp4",
      origin: rand(2) ? "human" : "algorithm",
    };
    assert.deepEqual(decodeThumbnailUrl(encodeThumbnailUrl(spec)), spec);
  }
});

test("missing origin defaults to human", () => {
  const url = encodeThumbnailUrl(SPEC).replace("&origin=human", "");
  assert.equal(decodeThumbnailUrl(url).origin, "human");
});

test("unknown extra parameters are ignored", () => {
  assert.deepEqual(decodeThumbnailUrl(encodeThumbnailUrl(SPEC) + "&utm=x"), SPEC);
});

test("errors name the offending parameter", () => {
  assert.throws(
    () => decodeThumbnailUrl("/thumbnail?root=a&boundsLTRB=0,0,1,1&width=1&height=1&startFrame=0&fps=1&format=gif"),
    /nframes/,
  );
  assert.throws(
    () => decodeThumbnailUrl(encodeThumbnailUrl(SPEC).replace("0,0,100,100", "100,0,50,100")),
    /left >= right/,
  );
});

test("validateSpec rejects degenerate boxes", () => {
  assert.throws(() => validateSpec({ ...SPEC, bounds: [5, 0, 5, 10] }), /left >= right/);
});
