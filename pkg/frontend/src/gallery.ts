/** Smoke-image gallery: the detector's events with copyable share links. */

import { SmokeData, SmokeEvent } from "./types.js";

export interface GalleryItem {
  event: SmokeEvent;
  /** absolute link ready for the clipboard */
  shareLink: string;
  /** wall-clock label derived from the dataset start + cadence */
  label: string;
}

export function galleryItems(
  smoke: SmokeData, baseUrl: string,
  datasetStartIso: string, intervalS: number,
): GalleryItem[] {
  const start = Date.parse(datasetStartIso);
  return smoke.events
    .slice()
    .sort((a, b) => a.start_frame - b.start_frame)
    .map((event) => {
      const t = new Date(start + event.start_frame * intervalS * 1000);
      return {
        event,
        shareLink: baseUrl + event.url,
        label: `${t.toISOString().slice(0, 16).replace("T", " ")} UTC · ` +
          `frames ${event.start_frame}-${event.end_frame} · peak ${event.peak_count}px`,
      };
    });
}
