// Typed client for the replay-service HTTP API. All numbers shown in the
// console come straight from these payloads; the client never recomputes
// errors or metrics.

export interface PidSnapshot {
  enabled: boolean;
  kp: number;
  ki: number;
  kd: number;
  integral: number;
}

export interface SyncTick {
  step: number;
  t_seconds: number;
  actual: number;
  raw_pred: number;
  adjusted_pred: number;
  error_raw: number;
  error_adjusted: number;
  u_applied: number;
  pid_snapshot: PidSnapshot;
}

export interface Metrics {
  ticks: number;
  mae_raw: number;
  rmse_raw: number;
  mae_adjusted: number;
  rmse_adjusted: number;
}

export interface ApiSnapshot {
  status: 'idle' | 'running' | 'paused' | 'finished';
  cursor: number;
  speed: number;
  pid: PidSnapshot;
  metrics: Metrics;
  last_tick: SyncTick | null;
  series: {
    label: string;
    length: number;
    bucket_seconds: number;
    start_ts: number;
  };
  model: { window_len: number; horizon: number; config_hash: string | null };
}

export interface PidUpdate {
  enabled?: boolean;
  kp?: number;
  ki?: number;
  kd?: number;
}

export interface ReplayCommand {
  action: 'start' | 'pause' | 'reset';
  speed?: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, body: string) {
    super(`HTTP ${status}: ${body}`);
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string = '') {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return (await resp.json()) as T;
  }

  getState(): Promise<ApiSnapshot> {
    return this.request('/api/state');
  }

  postPid(update: PidUpdate): Promise<ApiSnapshot> {
    return this.request('/api/pid', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(update),
    });
  }

  postReplay(cmd: ReplayCommand): Promise<ApiSnapshot> {
    return this.request('/api/replay', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(cmd),
    });
  }

  getLog(fromStep = 0): Promise<SyncTick[]> {
    return this.request(`/api/log?from=${fromStep}`);
  }

  streamUrl(): string {
    return this.baseUrl + '/api/stream';
  }
}
