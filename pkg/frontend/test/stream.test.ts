import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import type { SyncTick } from '../src/api.js';
import { ConsoleStore } from '../src/store.js';
import { TickStream } from '../src/stream.js';
import { makeTick } from './helpers.js';

class FakeEventSource {
  static instances: FakeEventSource[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((e: { data: string }) => void) | null = null;
  onerror: (() => void) | null = null;
  closed = false;

  constructor(readonly url: string) {
    FakeEventSource.instances.push(this);
  }

  close() {
    this.closed = true;
  }

  emitOpen() {
    this.onopen?.();
  }

  emitTick(tick: SyncTick) {
    this.onmessage?.({ data: JSON.stringify(tick) });
  }

  emitError() {
    this.onerror?.();
  }
}

beforeEach(() => {
  FakeEventSource.instances = [];
  vi.stubGlobal('EventSource', FakeEventSource);
  vi.useFakeTimers();
});

afterEach(() => {
  vi.unstubAllGlobals();
  vi.useRealTimers();
});

describe('TickStream', () => {
  it('parses data events into ticks', () => {
    const seen: SyncTick[] = [];
    const stream = new TickStream('/api/stream', { onTick: (t) => seen.push(t) });
    stream.connect();
    const es = FakeEventSource.instances[0];
    es.emitOpen();
    es.emitTick(makeTick(7));
    expect(seen.map((t) => t.step)).toEqual([7]);
    stream.close();
  });

  it('reconnects after an error with backoff', () => {
    const statuses: string[] = [];
    const stream = new TickStream('/api/stream', {
      onTick: () => {},
      onStatus: (s) => statuses.push(s),
    });
    stream.connect();
    FakeEventSource.instances[0].emitError();
    expect(FakeEventSource.instances).toHaveLength(1);
    vi.advanceTimersByTime(600);
    expect(FakeEventSource.instances).toHaveLength(2);
    // second failure waits longer than the first
    FakeEventSource.instances[1].emitError();
    vi.advanceTimersByTime(600);
    expect(FakeEventSource.instances).toHaveLength(2);
    vi.advanceTimersByTime(600);
    expect(FakeEventSource.instances).toHaveLength(3);
    expect(statuses).toContain('closed');
    stream.close();
  });

  it('no duplicate steps plotted across a reconnect', () => {
    const store = new ConsoleStore();
    const stream = new TickStream('/api/stream', {
      onTick: (t) => store.push(t),
    });
    stream.connect();
    const first = FakeEventSource.instances[0];
    first.emitOpen();
    first.emitTick(makeTick(1));
    first.emitTick(makeTick(2));
    first.emitError();
    vi.advanceTimersByTime(600);
    const second = FakeEventSource.instances[1];
    second.emitOpen();
    second.emitTick(makeTick(2)); // replayed after reconnect
    second.emitTick(makeTick(3));
    expect(store.recent().map((t) => t.step)).toEqual([1, 2, 3]);
    stream.close();
  });

  it('close stops reconnect attempts', () => {
    const stream = new TickStream('/api/stream', { onTick: () => {} });
    stream.connect();
    FakeEventSource.instances[0].emitError();
    stream.close();
    vi.advanceTimersByTime(60_000);
    expect(FakeEventSource.instances).toHaveLength(1);
    expect(FakeEventSource.instances[0].closed).toBe(true);
  });
});
