// Console entry point: wires the store, stream, charts and controls to the
// DOM in index.html.

import { ApiClient } from './api.js';
import {
  errorChartData,
  renderErrorChart,
  renderTrafficChart,
  trafficChartData,
} from './charts.js';
import { PidControls, TransportControls, type GainName } from './controls.js';
import { ConsoleStore } from './store.js';
import { TickStream } from './stream.js';

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

function toast(message: string): void {
  const el = $('toast');
  el.textContent = message;
  el.classList.add('visible');
  setTimeout(() => el.classList.remove('visible'), 4000);
}

export function bootstrap(baseUrl = ''): void {
  const api = new ApiClient(baseUrl);
  const store = new ConsoleStore();

  const pid = new PidControls(
    api,
    store,
    {
      toggle: $('pid-toggle'),
      sliders: Object.fromEntries(
        (['kp', 'ki', 'kd'] as GainName[]).map((g) => [g, $(`slider-${g}`)]),
      ) as Record<GainName, HTMLInputElement>,
      readouts: Object.fromEntries(
        (['kp', 'ki', 'kd'] as GainName[]).map((g) => [g, $(`value-${g}`)]),
      ),
    },
    toast,
  );
  const transport = new TransportControls(
    api,
    store,
    {
      start: $('btn-start'),
      pause: $('btn-pause'),
      reset: $('btn-reset'),
      speed: $('speed-select'),
      metrics: $('metrics'),
    },
    toast,
  );

  const trafficCanvas = $('traffic-chart') as unknown as HTMLCanvasElement;
  const errorCanvas = $('error-chart') as unknown as HTMLCanvasElement;

  store.subscribe(() => {
    const ticks = store.recent();
    renderTrafficChart(trafficCanvas, trafficChartData(ticks));
    renderErrorChart(errorCanvas, errorChartData(ticks));
    if (store.snapshot) {
      pid.sync(store.snapshot);
      transport.sync(store.snapshot);
      $('status').textContent =
        `${store.snapshot.status} · step ${store.snapshot.cursor}` +
        `/${store.snapshot.series.length} · ${store.connection}`;
    }
    const connected = store.connection === 'open';
    pid.setConnected(connected);
    transport.setConnected(connected);
    $('reconnect-banner').classList.toggle('visible', !connected);
  });

  const stream = new TickStream(api.streamUrl(), {
    onTick: (tick) => {
      store.push(tick);
      if (store.snapshot) {
        // keep the header PID badge live between state polls
        store.snapshot.pid = tick.pid_snapshot;
      }
    },
    onStatus: (status) => {
      store.setConnection(status === 'open' ? 'open' : status);
      if (status === 'open') void api.getState().then((s) => store.setSnapshot(s));
    },
  });

  void api.getState().then((s) => store.setSnapshot(s));
  stream.connect();
}

if (typeof document !== 'undefined' && document.getElementById('pid-toggle')) {
  bootstrap();
}
