/** JSON payload shapes exchanged with the plumewatch HTTP API. */

export interface DatasetInfo {
  id: string;
  capture_date: string;
  capture_interval_s: number;
  frame_width: number;
  frame_height: number;
  frame_count: number;
  start_time: string;
  end_time: string;
  tiled: boolean;
  tile_size?: number;
  num_levels?: number;
}

export interface ThumbnailSpec {
  dataset_id: string;
  bounds: [number, number, number, number]; // left, top, right, bottom (native px)
  out_width: number;
  out_height: number;
  start_frame: number;
  nframes: number;
  fps: number;
  format: "gif" | "mp4";
  origin: "human" | "algorithm";
}

export interface SmokeFrame {
  frame_index: number;
  smoke_pixel_count: number;
  is_daytime: boolean;
}

export interface SmokeEvent {
  start_frame: number;
  end_frame: number;
  peak_count: number;
  bounds: [number, number, number, number];
  url: string;
}

export interface SmokeData {
  frames: SmokeFrame[];
  events: SmokeEvent[];
}

export interface WindInfo {
  t: string;
  speed: number;
  direction: number; // degrees the wind comes FROM
}

export interface SmellReportInfo {
  report_id: number;
  t: string;
  severity: number; // 1..5, 5 worst
  note: string | null;
}

export interface ReadingInfo {
  station_id: string;
  t: string;
  pm25: number;
}

export interface ContextData {
  wind: WindInfo | null;
  smell_reports: SmellReportInfo[];
  latest_readings: Record<string, ReadingInfo>;
}

export interface SeriesBucket {
  bucket_start: string;
  mean: number | null;
  count: number;
}

export interface SeriesData {
  series: Record<string, SeriesBucket[]>;
}

export interface FrameIndexData {
  dataset: string;
  frame_index: number;
  capture_time: string;
}

export interface ApiErrorBody {
  error: string;
  parameter?: string;
}
