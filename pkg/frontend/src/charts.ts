/** Linked-chart time cursor and the stale-response guard.
 *
 * The dashboard has a single source of truth for "current time": the chart
 * cursor, the viewer frame, and the map context snapshot all derive from it.
 * Server responses that arrive out of order are discarded by sequence
 * number so a slow reply can never clobber a newer state.
 */

export interface TimeCursor {
  /** epoch ms of the time everything is synced to */
  timeMs: number;
  /** monotonically increasing; stamps every outbound request */
  seq: number;
}

export function makeCursor(timeMs: number): TimeCursor {
  return { timeMs, seq: 0 };
}

export function moveCursor(cursor: TimeCursor, timeMs: number): TimeCursor {
  return { timeMs, seq: cursor.seq + 1 };
}

/** True when a response stamped `responseSeq` is still current. */
export function isFresh(cursor: TimeCursor, responseSeq: number): boolean {
  return responseSeq === cursor.seq;
}

export interface ChartPoint {
  timeMs: number;
  value: number;
}

export interface ChartGeometry {
  t0Ms: number;
  t1Ms: number;
  width: number;
  height: number;
  vMax: number;
}

export function timeToX(geometry: ChartGeometry, timeMs: number): number {
  return ((timeMs - geometry.t0Ms) / (geometry.t1Ms - geometry.t0Ms)) * geometry.width;
}

export function xToTimeMs(geometry: ChartGeometry, x: number): number {
  return geometry.t0Ms + (x / geometry.width) * (geometry.t1Ms - geometry.t0Ms);
}

export function valueToY(geometry: ChartGeometry, value: number): number {
  const vMax = geometry.vMax || 1;
  return geometry.height - (value / vMax) * geometry.height;
}

/** Nearest data point to a clicked x; null when the series is empty. */
export function nearestPoint(
  geometry: ChartGeometry, points: ChartPoint[], clickX: number,
): ChartPoint | null {
  const clickedMs = xToTimeMs(geometry, clickX);
  let best: ChartPoint | null = null;
  let bestDist = Infinity;
  for (const point of points) {
    const dist = Math.abs(point.timeMs - clickedMs);
    // ties break toward the earlier timestamp, matching the backend
    if (dist < bestDist || (dist === bestDist && best !== null && point.timeMs < best.timeMs)) {
      best = point;
      bestDist = dist;
    }
  }
  return best;
}
