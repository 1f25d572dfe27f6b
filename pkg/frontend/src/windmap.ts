/** Map layer math: wind arrow and station bars on a stub coordinate plane.
 *
 * Wind direction arrives in meteorological convention (degrees the wind
 * comes FROM, 0 = north wind); the rendered arrow points where the wind is
 * going, i.e. direction + 180. Bar colors follow the station registration
 * order so they always match the chart line colors.
 */

import { ContextData } from "./types.js";

export const STATION_PALETTE = [
  "#3567c2", // blue
  "#8e44ad", // purple
  "#2e9e4f", // green
  "#e67e22", // orange
  "#c0392b",
  "#16a085",
  "#7f8c8d",
];

export function stationColor(order: number): string {
  return STATION_PALETTE[order % STATION_PALETTE.length]!;
}

export interface ArrowState {
  visible: boolean;
  /** screen angle in degrees, 0 = up (north), clockwise positive */
  angleDeg: number;
  /** arrow length in px, proportional to speed */
  lengthPx: number;
  speed: number;
}

export interface BarState {
  stationId: string;
  color: string;
  /** bar height in px, proportional to the latest reading */
  heightPx: number;
  pm25: number | null;
}

export interface MapLayerState {
  arrow: ArrowState;
  bars: BarState[];
}

export const PX_PER_MS = 14; // arrow pixels per m/s of wind speed
export const PX_PER_UGM3 = 1.6; // bar pixels per ug/m3

export function arrowFor(context: ContextData): ArrowState {
  const wind = context.wind;
  if (wind === null || wind.speed === 0) {
    return { visible: false, angleDeg: 0, lengthPx: 0, speed: wind?.speed ?? 0 };
  }
  return {
    visible: true,
    angleDeg: (wind.direction + 180) % 360,
    lengthPx: wind.speed * PX_PER_MS,
    speed: wind.speed,
  };
}

/** One bar per station, registration order; stations with no fresh reading
 * keep their slot (zero height) so colors stay stable. */
export function barsFor(context: ContextData, stationOrder: string[]): BarState[] {
  return stationOrder.map((stationId, i) => {
    const reading = context.latest_readings[stationId];
    return {
      stationId,
      color: stationColor(i),
      heightPx: reading ? reading.pm25 * PX_PER_UGM3 : 0,
      pm25: reading ? reading.pm25 : null,
    };
  });
}

export function renderMap(context: ContextData, stationOrder: string[]): MapLayerState {
  return { arrow: arrowFor(context), bars: barsFor(context, stationOrder) };
}
