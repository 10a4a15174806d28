// SSE subscription with automatic reconnect. Each `data:` event is one
// JSON-encoded tick; comment lines (heartbeats) are handled by the
// browser's EventSource and never reach onmessage.

import type { SyncTick } from './api.js';

export interface StreamHandlers {
  onTick: (tick: SyncTick) => void;
  onStatus?: (status: 'connecting' | 'open' | 'closed') => void;
}

const RECONNECT_BASE_MS = 500;
const RECONNECT_MAX_MS = 10_000;

export class TickStream {
  private source: EventSource | null = null;
  private attempts = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private readonly url: string,
    private readonly handlers: StreamHandlers,
  ) {}

  connect(): void {
    this.stopped = false;
    this.open();
  }

  close(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.source?.close();
    this.source = null;
    this.handlers.onStatus?.('closed');
  }

  private open(): void {
    this.source?.close();
    this.handlers.onStatus?.('connecting');
    this.source = new EventSource(this.url);
    this.source.onopen = () => {
      this.attempts = 0;
      this.handlers.onStatus?.('open');
    };
    this.source.onmessage = (e: MessageEvent) => {
      this.handlers.onTick(JSON.parse(e.data) as SyncTick);
    };
    this.source.onerror = () => {
      if (this.stopped) return;
      this.source?.close();
      this.source = null;
      this.handlers.onStatus?.('closed');
      const delay = Math.min(
        RECONNECT_BASE_MS * 2 ** this.attempts,
        RECONNECT_MAX_MS,
      );
      this.attempts += 1;
      this.timer = setTimeout(() => this.open(), delay);
    };
  }
}
