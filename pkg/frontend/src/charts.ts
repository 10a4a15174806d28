// Chart data derivation and canvas rendering. Derivation is pure
// pass-through from tick fields (absolute value only, for bar heights) so
// every plotted number is traceable to a server value. Color mapping is
// fixed: green actual, orange raw prediction, blue PID-adjusted.

import type { SyncTick } from './api.js';

export const COLORS = {
  actual: '#2e9e4f',
  raw: '#e8842c',
  adjusted: '#2d6cdf',
} as const;

export interface TrafficChartData {
  t: number[];
  actual: number[];
  raw: number[];
  adjusted: number[];
}

export interface ErrorChartData {
  t: number[];
  raw: number[]; // |error_raw| bar heights
  adjusted: number[]; // |error_adjusted| bar heights
}

export function trafficChartData(ticks: readonly SyncTick[]): TrafficChartData {
  return {
    t: ticks.map((k) => k.t_seconds),
    actual: ticks.map((k) => k.actual),
    raw: ticks.map((k) => k.raw_pred),
    adjusted: ticks.map((k) => k.adjusted_pred),
  };
}

export function errorChartData(ticks: readonly SyncTick[]): ErrorChartData {
  return {
    t: ticks.map((k) => k.t_seconds),
    raw: ticks.map((k) => Math.abs(k.error_raw)),
    adjusted: ticks.map((k) => Math.abs(k.error_adjusted)),
  };
}

function extent(series: number[][]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const v of s) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

function drawEmptyState(ctx: CanvasRenderingContext2D, w: number, h: number) {
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = '#888';
  ctx.font = '14px sans-serif';
  ctx.textAlign = 'center';
  ctx.fillText('waiting for data…', w / 2, h / 2);
}

function drawLine(
  ctx: CanvasRenderingContext2D,
  xs: number[],
  ys: number[],
  toX: (x: number) => number,
  toY: (y: number) => number,
  color: string,
) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  xs.forEach((x, i) => {
    const px = toX(x);
    const py = toY(ys[i]);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}

export function renderTrafficChart(
  canvas: HTMLCanvasElement,
  data: TrafficChartData,
): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  if (data.t.length === 0) {
    drawEmptyState(ctx, w, h);
    return;
  }
  ctx.clearRect(0, 0, w, h);
  const [x0, x1] = extent([data.t]);
  const [y0, y1] = extent([data.actual, data.raw, data.adjusted]);
  const pad = 8;
  const toX = (x: number) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const toY = (y: number) =>
    h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  drawLine(ctx, data.t, data.actual, toX, toY, COLORS.actual);
  drawLine(ctx, data.t, data.raw, toX, toY, COLORS.raw);
  drawLine(ctx, data.t, data.adjusted, toX, toY, COLORS.adjusted);
}

export function renderErrorChart(
  canvas: HTMLCanvasElement,
  data: ErrorChartData,
): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  if (data.t.length === 0) {
    drawEmptyState(ctx, w, h);
    return;
  }
  ctx.clearRect(0, 0, w, h);
  const [, y1] = extent([data.raw, data.adjusted, [0]]);
  const pad = 8;
  const n = data.t.length;
  const slot = (w - 2 * pad) / n;
  const barW = Math.max(1, slot * 0.4);
  const toH = (v: number) => (v / (y1 || 1)) * (h - 2 * pad);
  data.t.forEach((_, i) => {
    const x = pad + i * slot;
    ctx.fillStyle = COLORS.raw;
    ctx.fillRect(x, h - pad - toH(data.raw[i]), barW, toH(data.raw[i]));
    ctx.fillStyle = COLORS.adjusted;
    ctx.fillRect(
      x + barW,
      h - pad - toH(data.adjusted[i]),
      barW,
      toH(data.adjusted[i]),
    );
  });
}
