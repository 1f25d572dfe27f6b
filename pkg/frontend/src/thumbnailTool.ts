/** The share tool: turn a dragged box on the viewer into a server-backed
 * animated-image URL. The box arrives in native pixels; degenerate boxes are
 * rejected client-side, anything else the server says (HTTP 400 text) is
 * surfaced verbatim. */

import { ApiClient, ApiError } from "./api.js";
import { DatasetInfo, ThumbnailSpec } from "./types.js";
import { ViewerState } from "./viewer.js";

export interface DragBox {
  left: number;
  top: number;
  right: number;
  bottom: number;
}

export interface ThumbnailRequest {
  spec: ThumbnailSpec;
  /** client-side validation failure, if any; nothing was sent */
  clientError: string | null;
}

export const DEFAULT_OUT = { width: 320, height: 240 };

export function buildSpec(
  state: ViewerState, dataset: DatasetInfo, box: DragBox,
  startFrame: number, nframes: number, fps = 12,
): ThumbnailRequest {
  const left = Math.max(0, Math.round(Math.min(box.left, box.right)));
  const top = Math.max(0, Math.round(Math.min(box.top, box.bottom)));
  const right = Math.min(dataset.frame_width, Math.round(Math.max(box.left, box.right)));
  const bottom = Math.min(dataset.frame_height, Math.round(Math.max(box.top, box.bottom)));
  const spec: ThumbnailSpec = {
    dataset_id: state.datasetId,
    bounds: [left, top, right, bottom],
    out_width: DEFAULT_OUT.width,
    out_height: DEFAULT_OUT.height,
    start_frame: startFrame,
    nframes,
    fps,
    format: "gif",
    origin: "human",
  };
  let clientError: string | null = null;
  if (right - left < 1 || bottom - top < 1) {
    clientError = "draw a box with some area first";
  } else if (nframes < 1) {
    clientError = "duration must cover at least one frame";
  } else if (startFrame + nframes > dataset.frame_count) {
    clientError = "time window runs past the end of the dataset";
  }
  return { spec, clientError };
}

export interface ShareResult {
  url: string | null;
  error: string | null;
}

/** POST the spec; the returned URL is what community members share. */
export async function shareThumbnail(
  api: ApiClient, request: ThumbnailRequest,
): Promise<ShareResult> {
  if (request.clientError) return { url: null, error: request.clientError };
  try {
    return { url: await api.createThumbnail(request.spec), error: null };
  } catch (err) {
    if (err instanceof ApiError) return { url: null, error: err.message };
    throw err;
  }
}
