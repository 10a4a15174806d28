import type { ApiSnapshot, PidSnapshot, SyncTick } from '../src/api.js';

export function makePid(overrides: Partial<PidSnapshot> = {}): PidSnapshot {
  return { enabled: false, kp: 0.4, ki: 0.05, kd: 0, integral: 0, ...overrides };
}

export function makeTick(step: number, overrides: Partial<SyncTick> = {}): SyncTick {
  return {
    step,
    t_seconds: step,
    actual: 100 + step,
    raw_pred: 95 + step,
    adjusted_pred: 95 + step,
    error_raw: 5,
    error_adjusted: 5,
    u_applied: 0,
    pid_snapshot: makePid(),
    ...overrides,
  };
}

export function makeSnapshot(overrides: Partial<ApiSnapshot> = {}): ApiSnapshot {
  return {
    status: 'running',
    cursor: 10,
    speed: 1,
    pid: makePid(),
    metrics: {
      ticks: 10,
      mae_raw: 5,
      rmse_raw: 5,
      mae_adjusted: 5,
      rmse_adjusted: 5,
    },
    last_tick: null,
    series: { label: 'video', length: 200, bucket_seconds: 1, start_ts: 0 },
    model: { window_len: 30, horizon: 1, config_hash: 'abc' },
    ...overrides,
  };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}
