/** Zoom/pan timelapse viewer state and the math that drives it.
 *
 * All coordinates here are native-resolution pixels; the DOM layer converts
 * to screen space with the scale derived from the fractional zoom. Zoom
 * level z displays pyramid level round(z) whose tiles are downscaled by
 * 2^(numLevels-1-level) relative to native.
 */

import { DatasetInfo } from "./types.js";

export interface ViewerState {
  datasetId: string;
  centerX: number; // native px, clamped to the frame
  centerY: number;
  zoom: number; // fractional, in [0, numLevels - 1]
  currentFrame: number;
  playing: boolean;
  playbackFps: number;
}

export interface TileRef {
  level: number;
  row: number;
  col: number;
}

export function initialState(dataset: DatasetInfo): ViewerState {
  return {
    datasetId: dataset.id,
    centerX: dataset.frame_width / 2,
    centerY: dataset.frame_height / 2,
    zoom: 0,
    currentFrame: 0,
    playing: false,
    playbackFps: 12,
  };
}

export function clampState(state: ViewerState, dataset: DatasetInfo): ViewerState {
  const maxZoom = (dataset.num_levels ?? 1) - 1;
  return {
    ...state,
    centerX: Math.min(Math.max(state.centerX, 0), dataset.frame_width),
    centerY: Math.min(Math.max(state.centerY, 0), dataset.frame_height),
    zoom: Math.min(Math.max(state.zoom, 0), maxZoom),
    currentFrame: Math.min(Math.max(state.currentFrame, 0), dataset.frame_count - 1),
  };
}

/** Native pixels per screen pixel at a fractional zoom. */
export function nativePerScreenPx(dataset: DatasetInfo, zoom: number): number {
  const numLevels = dataset.num_levels ?? 1;
  // at zoom z the native level (numLevels-1) maps 1:1; each step away halves
  return Math.pow(2, numLevels - 1 - zoom);
}

/** The pyramid level whose tiles best match a fractional zoom. */
export function levelForZoom(dataset: DatasetInfo, zoom: number): number {
  const maxLevel = (dataset.num_levels ?? 1) - 1;
  return Math.min(Math.max(Math.round(zoom), 0), maxLevel);
}

export function gridAtLevel(dataset: DatasetInfo, level: number): { rows: number; cols: number } {
  const numLevels = dataset.num_levels ?? 1;
  const tile = dataset.tile_size ?? 512;
  const span = tile * Math.pow(2, numLevels - 1 - level);
  return {
    cols: Math.ceil(dataset.frame_width / span),
    rows: Math.ceil(dataset.frame_height / span),
  };
}

/** Tiles intersecting a screen viewport centered on the state's center. */
export function visibleTiles(
  state: ViewerState, dataset: DatasetInfo,
  viewportW: number, viewportH: number,
): TileRef[] {
  if (!dataset.tiled) return [];
  const level = levelForZoom(dataset, state.zoom);
  const numLevels = dataset.num_levels ?? 1;
  const tile = dataset.tile_size ?? 512;
  const span = tile * Math.pow(2, numLevels - 1 - level); // native px per tile
  const scale = nativePerScreenPx(dataset, state.zoom);
  const halfW = (viewportW * scale) / 2;
  const halfH = (viewportH * scale) / 2;
  const { rows, cols } = gridAtLevel(dataset, level);
  const c0 = Math.max(Math.floor((state.centerX - halfW) / span), 0);
  const c1 = Math.min(Math.floor((state.centerX + halfW) / span), cols - 1);
  const r0 = Math.max(Math.floor((state.centerY - halfH) / span), 0);
  const r1 = Math.min(Math.floor((state.centerY + halfH) / span), rows - 1);
  const out: TileRef[] = [];
  for (let row = r0; row <= r1; row++) {
    for (let col = c0; col <= c1; col++) out.push({ level, row, col });
  }
  return out;
}

export interface SeekResult {
  state: ViewerState;
  /** set when the clicked time fell outside the dataset and was snapped */
  notice: string | null;
}

/** Jump the viewer to the frame for a chart click; playback pauses.
 *
 * `frameIndex` comes from the backend's frame-index lookup for the clicked
 * timestamp. Timestamps outside the dataset snap to the nearest end and
 * produce a notice for the UI to surface.
 */
export function seekFromChart(
  state: ViewerState, dataset: DatasetInfo,
  clickedIsoTime: string, frameIndex: number,
): SeekResult {
  let notice: string | null = null;
  const clicked = Date.parse(clickedIsoTime);
  if (clicked < Date.parse(dataset.start_time)) {
    notice = "time precedes this dataset; showing its first frame";
  } else if (clicked > Date.parse(dataset.end_time)) {
    notice = "time is after this dataset; showing its last frame";
  }
  const clamped = Math.min(Math.max(frameIndex, 0), dataset.frame_count - 1);
  return {
    state: { ...state, currentFrame: clamped, playing: false },
    notice,
  };
}

/** Wall-clock time of the viewer's current frame. */
export function frameTimeIso(dataset: DatasetInfo, frame: number): string {
  const start = Date.parse(dataset.start_time);
  const t = start + frame * dataset.capture_interval_s * 1000;
  return new Date(t).toISOString().replace(/\.\d{3}Z$/, "Z");
}
