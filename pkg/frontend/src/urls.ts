/** Client-side mirror of the server's thumbnail URL grammar.
 *
 * The parameter order and plain-integer encoding are normative on the
 * backend; keeping the encoder bit-identical here means a URL built in the
 * browser matches what the server would emit for the same spec.
 */

import { ThumbnailSpec } from "./types.js";

export function encodeThumbnailUrl(spec: ThumbnailSpec): string {
  const [l, t, r, b] = spec.bounds;
  return (
    `/thumbnail?root=${spec.dataset_id}` +
    `&boundsLTRB=${l},${t},${r},${b}` +
    `&width=${spec.out_width}&height=${spec.out_height}` +
    `&startFrame=${spec.start_frame}&nframes=${spec.nframes}&fps=${spec.fps}` +
    `&format=${spec.format}&origin=${spec.origin}`
  );
}

const INT = /^-?\d+$/;

function intParam(params: URLSearchParams, key: string): number {
  const raw = params.get(key);
  if (raw === null) throw new Error(`missing required parameter '${key}'`);
  if (!INT.test(raw)) throw new Error(`parameter '${key}' must be an integer, got '${raw}'`);
  return parseInt(raw, 10);
}

export function decodeThumbnailUrl(url: string): ThumbnailSpec {
  const query = url.includes("?") ? url.slice(url.indexOf("?") + 1) : "";
  const path = url.split("?", 1)[0] ?? "";
  if (!path.endsWith("/thumbnail")) throw new Error(`not a thumbnail URL: ${path}`);
  const params = new URLSearchParams(query);
  const root = params.get("root");
  if (root === null) throw new Error("missing required parameter 'root'");
  const rawBounds = params.get("boundsLTRB");
  if (rawBounds === null) throw new Error("missing required parameter 'boundsLTRB'");
  const parts = rawBounds.split(",");
  if (parts.length !== 4 || !parts.every((p) => INT.test(p))) {
    throw new Error(`boundsLTRB must be four integers, got '${rawBounds}'`);
  }
  const bounds = parts.map((p) => parseInt(p, 10)) as [number, number, number, number];
  const format = params.get("format");
  if (format !== "gif" && format !== "mp4") throw new Error(`bad format '${format}'`);
  const origin = params.get("origin") ?? "human";
  if (origin !== "human" && origin !== "algorithm") throw new Error(`bad origin '${origin}'`);
  const spec: ThumbnailSpec = {
    dataset_id: root,
    bounds,
    out_width: intParam(params, "width"),
    out_height: intParam(params, "height"),
    start_frame: intParam(params, "startFrame"),
    nframes: intParam(params, "nframes"),
    fps: intParam(params, "fps"),
    format,
    origin,
  };
  validateSpec(spec);
  return spec;
}

export function validateSpec(spec: ThumbnailSpec): void {
  const [l, t, r, b] = spec.bounds;
  if (l < 0 || t < 0) throw new Error("bounds must be non-negative");
  if (l >= r) throw new Error(`left >= right (${l} >= ${r})`);
  if (t >= b) throw new Error(`top >= bottom (${t} >= ${b})`);
  if (spec.out_width < 1 || spec.out_height < 1) throw new Error("output size must be >= 1");
  if (spec.nframes < 1) throw new Error("nframes must be >= 1");
  if (spec.fps < 1) throw new Error("fps must be >= 1");
  if (spec.start_frame < 0) throw new Error("startFrame must be >= 0");
}
