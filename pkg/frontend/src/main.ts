/** Dashboard wiring: viewer + linked charts + map + share tool + gallery.
 *
 * One TimeCursor drives everything visible: the viewer's frame, the chart
 * cursor line, and the map context snapshot. Chart clicks move the cursor
 * through the backend's frame-index lookup; stale context responses are
 * discarded by sequence number.
 */

import { ApiClient } from "./api.js";
import {
  ChartGeometry, ChartPoint, makeCursor, moveCursor, isFresh,
  nearestPoint, timeToX, valueToY, xToTimeMs,
} from "./charts.js";
import { decodeClip, rgbToRgba, TileClip } from "./clip.js";
import { galleryItems } from "./gallery.js";
import { buildSpec, shareThumbnail } from "./thumbnailTool.js";
import { ContextData, DatasetInfo, SeriesBucket, SmokeData } from "./types.js";
import {
  clampState, frameTimeIso, initialState, levelForZoom, nativePerScreenPx,
  seekFromChart, visibleTiles, ViewerState,
} from "./viewer.js";
import { renderMap, stationColor } from "./windmap.js";

const api = new ApiClient("");

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

interface App {
  dataset: DatasetInfo;
  state: ViewerState;
  cursor: ReturnType<typeof makeCursor>;
  smoke: SmokeData;
  series: Record<string, SeriesBucket[]>;
  stationOrder: string[];
  context: ContextData | null;
  shareMode: boolean;
  dragBox: { x0: number; y0: number; x1: number; y1: number } | null;
  notice: string | null;
}

const CLIP_CHUNK = 32; // frames fetched per tile request
const tileCache = new Map<string, Promise<TileClip>>();

function tileChunk(app: App, level: number, row: number, col: number, frame: number) {
  const chunk = Math.floor(frame / CLIP_CHUNK);
  const key = `${app.dataset.id}/${level}/${row}/${col}/${chunk}`;
  let clip = tileCache.get(key);
  if (!clip) {
    const start = chunk * CLIP_CHUNK;
    const n = Math.min(CLIP_CHUNK, app.dataset.frame_count - start);
    clip = api
      .tileClip(app.dataset.id, level, row, col, start, n)
      .then((buffer) => decodeClip(buffer));
    tileCache.set(key, clip);
  }
  return { clip, offset: frame - chunk * CLIP_CHUNK };
}

// --- viewer -----------------------------------------------------------------

const scratch = document.createElement("canvas");

async function drawViewer(app: App) {
  const canvas = $<HTMLCanvasElement>("viewer");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = "#16181d";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  const { dataset, state } = app;
  if (!dataset.tiled) {
    ctx.fillStyle = "#ccc";
    ctx.fillText("dataset has no tile pyramid (run: plumewatch tile)", 16, 24);
    return;
  }
  const level = levelForZoom(dataset, state.zoom);
  const scale = nativePerScreenPx(dataset, state.zoom); // native px per screen px
  const tileNative = (dataset.tile_size ?? 512) * Math.pow(2, (dataset.num_levels ?? 1) - 1 - level);
  const toScreenX = (nx: number) => canvas.width / 2 + (nx - state.centerX) / scale;
  const toScreenY = (ny: number) => canvas.height / 2 + (ny - state.centerY) / scale;

  const frame = state.currentFrame;
  const refs = visibleTiles(state, dataset, canvas.width, canvas.height);
  await Promise.all(
    refs.map(async ({ level: l, row, col }) => {
      try {
        const { clip, offset } = tileChunk(app, l, row, col, frame);
        const decoded = await clip;
        const rgb = decoded.frames[offset];
        if (!rgb || frame !== app.state.currentFrame) return; // stale draw
        scratch.width = decoded.width;
        scratch.height = decoded.height;
        const sctx = scratch.getContext("2d");
        if (!sctx) return;
        sctx.putImageData(
          new ImageData(rgbToRgba(rgb, decoded.width, decoded.height), decoded.width, decoded.height),
          0, 0,
        );
        const x = toScreenX(col * tileNative);
        const y = toScreenY(row * tileNative);
        const sizePx = tileNative / scale;
        ctx.imageSmoothingEnabled = state.zoom >= (dataset.num_levels ?? 1) - 1;
        ctx.drawImage(scratch, x, y, sizePx, sizePx);
      } catch {
        /* tile fetch failed; leave the cell dark */
      }
    }),
  );

  if (app.dragBox) {
    ctx.strokeStyle = "#35d06a";
    ctx.lineWidth = 2;
    const { x0, y0, x1, y1 } = app.dragBox;
    ctx.strokeRect(Math.min(x0, x1), Math.min(y0, y1), Math.abs(x1 - x0), Math.abs(y1 - y0));
  }
  $("frame-label").textContent =
    `frame ${state.currentFrame + 1}/${dataset.frame_count} · ` +
    frameTimeIso(dataset, state.currentFrame);
  $("notice").textContent = app.notice ?? "";
}

// --- charts ---------------------------------------------------------------

function chartGeometry(app: App, canvas: HTMLCanvasElement, vMax: number): ChartGeometry {
  return {
    t0Ms: Date.parse(app.dataset.start_time),
    t1Ms: Date.parse(app.dataset.end_time),
    width: canvas.width,
    height: canvas.height,
    vMax,
  };
}

function drawCharts(app: App) {
  const canvas = $<HTMLCanvasElement>("charts");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const half = canvas.height / 2;

  // top: pm2.5 per station
  let vMax = 10;
  for (const buckets of Object.values(app.series)) {
    for (const b of buckets) if (b.mean !== null) vMax = Math.max(vMax, b.mean);
  }
  const topGeom = { ...chartGeometry(app, canvas, vMax), height: half - 14 };
  app.stationOrder.forEach((station, i) => {
    const buckets = app.series[station] ?? [];
    ctx.strokeStyle = stationColor(i);
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    let started = false;
    for (const b of buckets) {
      if (b.mean === null) continue;
      const x = timeToX(topGeom, Date.parse(b.bucket_start));
      const y = valueToY(topGeom, b.mean);
      if (started) ctx.lineTo(x, y);
      else ctx.moveTo(x, y);
      started = true;
    }
    ctx.stroke();
  });

  // smell report markers near the cursor (context window)
  if (app.context) {
    for (const report of app.context.smell_reports) {
      const x = timeToX(topGeom, Date.parse(report.t));
      ctx.fillStyle = "#d03535";
      const size = 3 + report.severity * 1.5;
      ctx.beginPath();
      ctx.arc(x, 12, size, 0, Math.PI * 2);
      ctx.fill();
    }
  }

  // bottom: smoke pixel counts
  const counts = app.smoke.frames;
  if (counts.length) {
    const peak = Math.max(10, ...counts.map((f) => f.smoke_pixel_count));
    const botGeom = { ...chartGeometry(app, canvas, peak), height: half - 14 };
    ctx.strokeStyle = "#555";
    ctx.beginPath();
    for (const f of counts) {
      const tMs = Date.parse(app.dataset.start_time) +
        f.frame_index * app.dataset.capture_interval_s * 1000;
      const x = timeToX(botGeom, tMs);
      const y = half + 14 + (botGeom.height - (f.smoke_pixel_count / peak) * botGeom.height);
      if (f.frame_index === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
  }

  // shared time cursor
  const geom = chartGeometry(app, canvas, 1);
  const x = timeToX(geom, app.cursor.timeMs);
  ctx.strokeStyle = "#e3a008";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(x, 0);
  ctx.lineTo(x, canvas.height);
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText("PM2.5 by station (smell reports in red)", 6, 10);
  ctx.fillText("smoke pixels per frame — click to seek the video", 6, half + 10);
}

// --- map -----------------------------------------------------------------------

function drawMapPanel(app: App) {
  const canvas = $<HTMLCanvasElement>("map");
  const ctx = canvas.getContext("2d");
  if (!ctx || !app.context) return;
  ctx.fillStyle = "#eef3ee";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const layer = renderMap(app.context, app.stationOrder);

  // station bars along the bottom: stub coordinate plane
  const slot = canvas.width / Math.max(1, layer.bars.length);
  layer.bars.forEach((bar, i) => {
    const x = slot * i + slot / 2;
    const h = Math.min(bar.heightPx, canvas.height - 40);
    ctx.fillStyle = bar.color;
    ctx.fillRect(x - 9, canvas.height - 18 - h, 18, h);
    ctx.fillStyle = "#333";
    ctx.font = "11px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(bar.stationId, x, canvas.height - 4);
    if (bar.pm25 !== null) ctx.fillText(bar.pm25.toFixed(0), x, canvas.height - 22 - h);
  });

  // wind arrow from the center
  if (layer.arrow.visible) {
    const cx = canvas.width / 2;
    const cy = canvas.height / 2 - 20;
    const rad = ((layer.arrow.angleDeg - 90) * Math.PI) / 180; // 0 deg = up
    const dx = Math.cos(rad) * layer.arrow.lengthPx;
    const dy = Math.sin(rad) * layer.arrow.lengthPx;
    ctx.strokeStyle = "#2563c2";
    ctx.fillStyle = "#2563c2";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(cx - dx / 2, cy - dy / 2);
    ctx.lineTo(cx + dx / 2, cy + dy / 2);
    ctx.stroke();
    const head = 8;
    const angle = Math.atan2(dy, dx);
    ctx.beginPath();
    ctx.moveTo(cx + dx / 2, cy + dy / 2);
    ctx.lineTo(cx + dx / 2 - head * Math.cos(angle - 0.5), cy + dy / 2 - head * Math.sin(angle - 0.5));
    ctx.lineTo(cx + dx / 2 - head * Math.cos(angle + 0.5), cy + dy / 2 - head * Math.sin(angle + 0.5));
    ctx.fill();
    ctx.textAlign = "left";
    ctx.fillText(`${layer.arrow.speed.toFixed(1)} m/s`, cx + 12, cy - 12);
  } else {
    ctx.fillStyle = "#666";
    ctx.textAlign = "center";
    ctx.fillText("no wind data near this time", canvas.width / 2, 20);
  }
  ctx.textAlign = "left";
}

// --- time sync --------------------------------------------------------------------

async function setCursorTime(app: App, timeMs: number, viaChartClick: boolean) {
  app.cursor = moveCursor(app.cursor, timeMs);
  const seq = app.cursor.seq;
  const iso = new Date(timeMs).toISOString().replace(/\.\d{3}Z$/, "Z");
  const [context, frameInfo] = await Promise.all([
    api.context(iso),
    api.frameIndexAt(app.dataset.id, iso),
  ]);
  if (!isFresh(app.cursor, seq)) return; // a newer click superseded this one
  app.context = context;
  if (viaChartClick) {
    const seek = seekFromChart(app.state, app.dataset, iso, frameInfo.frame_index);
    app.state = seek.state;
    app.notice = seek.notice;
    setPlaying(app, false);
  }
  void drawViewer(app);
  drawCharts(app);
  drawMapPanel(app);
}

// --- playback ---------------------------------------------------------------------

let playTimer: number | null = null;

function setPlaying(app: App, playing: boolean) {
  app.state = { ...app.state, playing };
  $("play").textContent = playing ? "pause" : "play";
  if (playTimer !== null) {
    clearInterval(playTimer);
    playTimer = null;
  }
  if (playing) {
    playTimer = setInterval(() => {
      const next = (app.state.currentFrame + 1) % app.dataset.frame_count;
      app.state = { ...app.state, currentFrame: next };
      app.cursor = moveCursor(app.cursor, Date.parse(frameTimeIso(app.dataset, next)));
      void drawViewer(app);
      drawCharts(app);
    }, 1000 / app.state.playbackFps) as unknown as number;
  }
}

// --- boot ------------------------------------------------------------------------

async function boot() {
  const datasets = await api.datasets();
  if (!datasets.length) {
    $("notice").textContent = "no datasets on the server yet";
    return;
  }
  const select = $<HTMLSelectElement>("dataset");
  for (const d of datasets) {
    const option = document.createElement("option");
    option.value = d.id;
    option.textContent = `${d.id} (${d.capture_date})`;
    select.appendChild(option);
  }

  const app: App = {
    dataset: datasets[0]!,
    state: initialState(datasets[0]!),
    cursor: makeCursor(Date.parse(datasets[0]!.start_time)),
    smoke: { frames: [], events: [] },
    series: {},
    stationOrder: [],
    context: null,
    shareMode: false,
    dragBox: null,
    notice: null,
  };

  async function loadDataset(id: string) {
    app.dataset = datasets.find((d) => d.id === id) ?? datasets[0]!;
    app.state = clampState(initialState(app.dataset), app.dataset);
    tileCache.clear();
    app.smoke = await api.smoke(app.dataset.id);
    const bucket = Math.max(60, Math.round(app.dataset.capture_interval_s * 10));
    try {
      const context = await api.context(app.dataset.start_time);
      app.stationOrder = Object.keys(context.latest_readings).sort();
    } catch {
      app.stationOrder = [];
    }
    if (app.stationOrder.length) {
      const data = await api.series(
        app.stationOrder, app.dataset.start_time, app.dataset.end_time, bucket,
      );
      app.series = data.series;
    }
    renderGallery(app);
    await setCursorTime(app, Date.parse(app.dataset.start_time), false);
  }

  select.addEventListener("change", () => void loadDataset(select.value));

  // viewer interactions: pan by drag, wheel to zoom, share-mode drag box
  const viewer = $<HTMLCanvasElement>("viewer");
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  viewer.addEventListener("mousedown", (e) => {
    dragging = true;
    lastX = e.offsetX;
    lastY = e.offsetY;
    if (app.shareMode) app.dragBox = { x0: e.offsetX, y0: e.offsetY, x1: e.offsetX, y1: e.offsetY };
  });
  viewer.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    if (app.shareMode && app.dragBox) {
      app.dragBox.x1 = e.offsetX;
      app.dragBox.y1 = e.offsetY;
    } else {
      const scale = nativePerScreenPx(app.dataset, app.state.zoom);
      app.state = clampState({
        ...app.state,
        centerX: app.state.centerX - (e.offsetX - lastX) * scale,
        centerY: app.state.centerY - (e.offsetY - lastY) * scale,
      }, app.dataset);
      lastX = e.offsetX;
      lastY = e.offsetY;
    }
    void drawViewer(app);
  });
  window.addEventListener("mouseup", () => (dragging = false));
  viewer.addEventListener("wheel", (e) => {
    e.preventDefault();
    app.state = clampState(
      { ...app.state, zoom: app.state.zoom + (e.deltaY < 0 ? 0.25 : -0.25) },
      app.dataset,
    );
    void drawViewer(app);
  });

  $("play").addEventListener("click", () => setPlaying(app, !app.state.playing));
  $("zoom-in").addEventListener("click", () => {
    app.state = clampState({ ...app.state, zoom: app.state.zoom + 0.5 }, app.dataset);
    void drawViewer(app);
  });
  $("zoom-out").addEventListener("click", () => {
    app.state = clampState({ ...app.state, zoom: app.state.zoom - 0.5 }, app.dataset);
    void drawViewer(app);
  });

  // share tool
  $("share").addEventListener("click", () => {
    app.shareMode = !app.shareMode;
    app.dragBox = null;
    $("share").classList.toggle("active", app.shareMode);
    $("share-panel").style.display = app.shareMode ? "block" : "none";
    void drawViewer(app);
  });
  $("share-go").addEventListener("click", () => void doShare(app));

  // chart click -> seek
  const charts = $<HTMLCanvasElement>("charts");
  charts.addEventListener("click", (e) => {
    const geom = chartGeometry(app, charts, 1);
    void setCursorTime(app, xToTimeMs(geom, e.offsetX), true);
  });

  // smell report form
  $("smell-go").addEventListener("click", () => {
    const severity = parseInt($<HTMLSelectElement>("smell-severity").value, 10);
    const note = $<HTMLInputElement>("smell-note").value;
    const iso = new Date(app.cursor.timeMs).toISOString().replace(/\.\d{3}Z$/, "Z");
    api
      .submitSmellReport(iso, severity, note)
      .then(() => {
        $("smell-status").textContent = "report submitted, thank you";
        return setCursorTime(app, app.cursor.timeMs, false);
      })
      .catch((err) => ($("smell-status").textContent = String(err.message ?? err)));
  });

  await loadDataset(datasets[0]!.id);
}

async function doShare(app: App) {
  if (!app.dragBox) {
    $("share-status").textContent = "drag a box on the viewer first";
    return;
  }
  const scale = nativePerScreenPx(app.dataset, app.state.zoom);
  const viewer = $<HTMLCanvasElement>("viewer");
  const toNativeX = (sx: number) => app.state.centerX + (sx - viewer.width / 2) * scale;
  const toNativeY = (sy: number) => app.state.centerY + (sy - viewer.height / 2) * scale;
  const { x0, y0, x1, y1 } = app.dragBox;
  const nframes = Math.max(1, parseInt($<HTMLInputElement>("share-nframes").value, 10) || 1);
  const request = buildSpec(
    app.state, app.dataset,
    { left: toNativeX(x0), top: toNativeY(y0), right: toNativeX(x1), bottom: toNativeY(y1) },
    app.state.currentFrame,
    Math.min(nframes, app.dataset.frame_count - app.state.currentFrame),
  );
  const result = await shareThumbnail(api, request);
  if (result.error) {
    $("share-status").textContent = result.error;
    return;
  }
  const url = result.url!;
  $("share-status").textContent = "";
  const link = $<HTMLAnchorElement>("share-link");
  link.href = url;
  link.textContent = location.origin + url;
  $<HTMLImageElement>("share-preview").src = url;
}

function renderGallery(app: App) {
  const list = $("gallery");
  list.innerHTML = "";
  const items = galleryItems(
    app.smoke, location.origin, app.dataset.start_time, app.dataset.capture_interval_s,
  );
  if (!items.length) {
    list.textContent = "no detected smoke events for this dataset";
    return;
  }
  for (const item of items) {
    const row = document.createElement("div");
    row.className = "gallery-item";
    const img = document.createElement("img");
    img.loading = "lazy";
    img.src = item.event.url;
    const label = document.createElement("div");
    label.textContent = item.label;
    const copy = document.createElement("button");
    copy.textContent = "copy link";
    copy.addEventListener("click", () => void navigator.clipboard.writeText(item.shareLink));
    row.append(img, label, copy);
    list.appendChild(row);
  }
}

void boot();
