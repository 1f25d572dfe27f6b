/** Thin typed client for the plumewatch gateway.
 *
 * All server interaction is asynchronous; responses that arrive out of order
 * are the caller's problem to discard (see charts.ts for the sequence-number
 * guard the dashboard uses).
 */

import {
  ApiErrorBody,
  ContextData,
  DatasetInfo,
  FrameIndexData,
  SeriesData,
  SmokeData,
  ThumbnailSpec,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly parameter?: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let body: ApiErrorBody = { error: `HTTP ${response.status}` };
      try {
        body = (await response.json()) as ApiErrorBody;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, body.error, body.parameter);
    }
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    return (await this.request(path, init)).json() as Promise<T>;
  }

  datasets(): Promise<DatasetInfo[]> {
    return this.json<DatasetInfo[]>("/api/datasets");
  }

  smoke(datasetId: string): Promise<SmokeData> {
    return this.json<SmokeData>(`/api/smoke/${encodeURIComponent(datasetId)}`);
  }

  series(stations: string[], t0: string, t1: string, bucketSeconds: number): Promise<SeriesData> {
    const params = new URLSearchParams({
      stations: stations.join(","),
      t0,
      t1,
      bucket: String(bucketSeconds),
    });
    return this.json<SeriesData>(`/api/series?${params}`);
  }

  context(t: string): Promise<ContextData> {
    return this.json<ContextData>(`/api/context?${new URLSearchParams({ t })}`);
  }

  frameIndexAt(datasetId: string, t: string): Promise<FrameIndexData> {
    const params = new URLSearchParams({ dataset: datasetId, t });
    return this.json<FrameIndexData>(`/api/frame_index?${params}`);
  }

  /** Registers a creation event server-side; resolves to the shareable URL. */
  async createThumbnail(spec: ThumbnailSpec): Promise<string> {
    const body = await this.json<{ url: string }>("/api/thumbnail", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(spec),
    });
    return body.url;
  }

  async submitSmellReport(t: string, severity: number, note?: string): Promise<void> {
    await this.request("/api/smell", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ t, severity, note: note || null }),
    });
  }

  async tileClip(
    datasetId: string, level: number, row: number, col: number,
    startFrame: number, nframes: number,
  ): Promise<ArrayBuffer> {
    const response = await this.request(
      `/tiles/${encodeURIComponent(datasetId)}/${level}/${row}/${col}` +
        `?startFrame=${startFrame}&nframes=${nframes}`,
    );
    return response.arrayBuffer();
  }
}
