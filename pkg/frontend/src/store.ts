// Client-side console state: a ring buffer of recent ticks plus the last
// server snapshot. Ticks are deduped by step so a stream reconnect (which
// may replay from the log) never double-plots.

import type { ApiSnapshot, SyncTick } from './api.js';

export const RING_CAPACITY = 600;

export type ConnectionStatus = 'connecting' | 'open' | 'closed';

export class ConsoleStore {
  readonly capacity: number;
  connection: ConnectionStatus = 'connecting';
  snapshot: ApiSnapshot | null = null;

  private ticks: SyncTick[] = [];
  private seen = new Set<number>();
  private listeners: Array<() => void> = [];

  constructor(capacity: number = RING_CAPACITY) {
    this.capacity = capacity;
  }

  push(tick: SyncTick): boolean {
    if (this.seen.has(tick.step)) return false;
    this.ticks.push(tick);
    this.seen.add(tick.step);
    while (this.ticks.length > this.capacity) {
      this.seen.delete(this.ticks.shift()!.step);
    }
    this.emit();
    return true;
  }

  recent(): readonly SyncTick[] {
    return this.ticks;
  }

  clear(): void {
    this.ticks = [];
    this.seen.clear();
    this.emit();
  }

  setSnapshot(snap: ApiSnapshot): void {
    this.snapshot = snap;
    this.emit();
  }

  setConnection(status: ConnectionStatus): void {
    this.connection = status;
    this.emit();
  }

  subscribe(fn: () => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }
}
