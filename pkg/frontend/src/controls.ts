// PID and transport controls. One control request in flight at a time;
// controls disable while waiting, acknowledged snapshots re-sync the
// widgets, and rejected updates roll the widget back to the last
// acknowledged value.

import { ApiClient, ApiError, type ApiSnapshot } from './api.js';
import type { ConsoleStore } from './store.js';

export const SLIDER_DEBOUNCE_MS = 150;

export const GAIN_RANGES = {
  kp: { min: 0, max: 5, step: 0.01 },
  ki: { min: 0, max: 2, step: 0.01 },
  kd: { min: 0, max: 2, step: 0.01 },
} as const;

export type GainName = keyof typeof GAIN_RANGES;

export type ToastFn = (message: string) => void;

interface PidElements {
  toggle: HTMLButtonElement;
  sliders: Record<GainName, HTMLInputElement>;
  readouts?: Partial<Record<GainName, HTMLElement>>;
}

export class PidControls {
  private inFlight = false;
  private acknowledged: Record<GainName, number> = { kp: 0, ki: 0, kd: 0 };
  private debounce: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly store: ConsoleStore,
    private readonly els: PidElements,
    private readonly toast: ToastFn = () => {},
  ) {
    for (const [name, range] of Object.entries(GAIN_RANGES)) {
      const el = els.sliders[name as GainName];
      el.min = String(range.min);
      el.max = String(range.max);
      el.step = String(range.step);
      el.addEventListener('input', () => this.showValue(name as GainName));
      el.addEventListener('change', () => this.queueGain(name as GainName));
    }
    els.toggle.addEventListener('click', () => this.onToggle());
  }

  /** Re-sync widgets from a server-acknowledged snapshot. */
  sync(snap: ApiSnapshot): void {
    this.els.toggle.textContent = snap.pid.enabled ? 'PID on' : 'PID off';
    this.els.toggle.classList.toggle('active', snap.pid.enabled);
    for (const name of Object.keys(GAIN_RANGES) as GainName[]) {
      this.acknowledged[name] = snap.pid[name];
      if (!this.inFlight && this.debounce === null) {
        this.els.sliders[name].value = String(snap.pid[name]);
        this.showValue(name);
      }
    }
  }

  setConnected(connected: boolean): void {
    const disabled = !connected || this.inFlight;
    this.els.toggle.disabled = disabled;
    for (const el of Object.values(this.els.sliders)) el.disabled = disabled;
  }

  private showValue(name: GainName): void {
    const out = this.els.readouts?.[name];
    if (out) out.textContent = this.els.sliders[name].value;
  }

  private onToggle(): void {
    const enable = !this.store.snapshot?.pid.enabled;
    void this.send({ enabled: enable });
  }

  private queueGain(name: GainName): void {
    // release fires one `change`; the debounce collapses rapid re-releases
    if (this.debounce !== null) clearTimeout(this.debounce);
    this.debounce = setTimeout(() => {
      this.debounce = null;
      const value = Number(this.els.sliders[name].value);
      void this.send({ [name]: value }, name);
    }, SLIDER_DEBOUNCE_MS);
  }

  private async send(
    update: Record<string, number | boolean>,
    rollback?: GainName,
  ): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    this.setConnected(this.store.connection === 'open');
    try {
      const snap = await this.api.postPid(update);
      this.store.setSnapshot(snap);
      this.sync(snap);
    } catch (err) {
      if (rollback) {
        this.els.sliders[rollback].value = String(this.acknowledged[rollback]);
        this.showValue(rollback);
      }
      this.toast(err instanceof ApiError ? err.message : String(err));
    } finally {
      this.inFlight = false;
      this.setConnected(this.store.connection === 'open');
    }
  }
}

interface TransportElements {
  start: HTMLButtonElement;
  pause: HTMLButtonElement;
  reset: HTMLButtonElement;
  speed: HTMLSelectElement;
  metrics: HTMLElement;
}

export class TransportControls {
  private inFlight = false;

  constructor(
    private readonly api: ApiClient,
    private readonly store: ConsoleStore,
    private readonly els: TransportElements,
    private readonly toast: ToastFn = () => {},
  ) {
    els.start.addEventListener('click', () =>
      this.send({ action: 'start', speed: Number(els.speed.value) }),
    );
    els.pause.addEventListener('click', () => this.send({ action: 'pause' }));
    els.reset.addEventListener('click', () => {
      this.store.clear();
      void this.send({ action: 'reset' });
    });
  }

  sync(snap: ApiSnapshot): void {
    const m = snap.metrics;
    this.els.metrics.textContent =
      m.ticks === 0
        ? 'MAE raw 0 / adj 0 · RMSE raw 0 / adj 0 · 0 ticks'
        : `MAE raw ${m.mae_raw.toFixed(2)} / adj ${m.mae_adjusted.toFixed(2)}` +
          ` · RMSE raw ${m.rmse_raw.toFixed(2)} / adj ` +
          `${m.rmse_adjusted.toFixed(2)} · ${m.ticks} ticks`;
  }

  setConnected(connected: boolean): void {
    const disabled = !connected || this.inFlight;
    this.els.start.disabled = disabled;
    this.els.pause.disabled = disabled;
    this.els.reset.disabled = disabled;
    this.els.speed.disabled = disabled;
  }

  private async send(cmd: {
    action: 'start' | 'pause' | 'reset';
    speed?: number;
  }): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    this.setConnected(this.store.connection === 'open');
    try {
      const snap = await this.api.postReplay(cmd);
      this.store.setSnapshot(snap);
      this.sync(snap);
    } catch (err) {
      this.toast(err instanceof ApiError ? err.message : String(err));
    } finally {
      this.inFlight = false;
      this.setConnected(this.store.connection === 'open');
    }
  }
}
