"""HTTP facade over a ReplaySession: SSE telemetry plus control endpoints.

All mutations funnel through a single command queue consumed by the loop
thread at tick boundaries; control responses return the snapshot taken after
the command was applied, so clients see the state the loop actually runs
with. Telemetry fans out through bounded per-subscriber queues (drop-oldest)
so a stalled consumer can never hold up the loop.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .errors import InvalidCommand
from .pid import PidGains
from .synchronizer import Exhausted, ReplaySession, SyncTick

HEARTBEAT_SECONDS = 15.0
DEFAULT_RETENTION = 10_000
DEFAULT_GAIN_MAX = 10.0


@dataclass
class _Command:
    fn: object  # callable(session) -> None
    done: threading.Event
    error: Exception | None = None


class SessionRunner:
    """Owns the loop thread; the only writer of the session."""

    def __init__(self, session: ReplaySession, retention: int = DEFAULT_RETENTION):
        self.session = session
        self._commands: queue.Queue[_Command] = queue.Queue()
        self._subscribers: list[queue.Queue] = []
        self._log: list[SyncTick] = []
        self._retention = retention
        self._lock = threading.Lock()  # guards session state + log for snapshots
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self):
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=5)

    @property
    def stopped(self) -> bool:
        return self._stop.is_set()

    def submit(self, fn, timeout: float = 10.0):
        """Run a mutation on the loop thread at the next tick boundary."""
        cmd = _Command(fn=fn, done=threading.Event())
        self._commands.put(cmd)
        if not cmd.done.wait(timeout):
            raise TimeoutError("command not acknowledged")
        if cmd.error is not None:
            raise cmd.error

    def subscribe(self, maxsize: int = 512) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=maxsize)
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue):
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def log_since(self, from_step: int) -> list[SyncTick]:
        with self._lock:
            return [t for t in self._log if t.step >= from_step]

    def live_edge(self) -> int:
        with self._lock:
            return self.session.cursor

    def _drain_commands(self):
        while True:
            try:
                cmd = self._commands.get_nowait()
            except queue.Empty:
                return
            with self._lock:
                try:
                    cmd.fn(self.session)
                except Exception as exc:  # surfaced to the submitting request
                    cmd.error = exc
            cmd.done.set()

    def _fan_out(self, tick: SyncTick):
        with self._lock:
            self._log.append(tick)
            if len(self._log) > self._retention:
                del self._log[: len(self._log) - self._retention]
            subs = list(self._subscribers)
        for q in subs:
            while True:
                try:
                    q.put_nowait(tick)
                    break
                except queue.Full:
                    try:
                        q.get_nowait()  # drop-oldest
                    except queue.Empty:
                        pass

    def _loop(self):
        t0 = time.monotonic()
        paced = 0
        last_speed = self.session.speed
        while not self._stop.is_set():
            self._drain_commands()
            if self.session.status != "running":
                try:
                    cmd = self._commands.get(timeout=0.1)
                except queue.Empty:
                    t0 = time.monotonic()
                    paced = 0
                    continue
                with self._lock:
                    try:
                        cmd.fn(self.session)
                    except Exception as exc:
                        cmd.error = exc
                cmd.done.set()
                t0 = time.monotonic()
                paced = 0
                last_speed = self.session.speed
                continue
            with self._lock:
                try:
                    tick = self.session.tick()
                except Exhausted:
                    continue
            self._fan_out(tick)
            if self.session.speed > 0:
                if self.session.speed != last_speed:
                    t0 = time.monotonic()
                    paced = 0
                    last_speed = self.session.speed
                paced += 1
                deadline = t0 + paced * self.session.series.bucket_seconds / self.session.speed
                delay = deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)

    def snapshot(self) -> dict:
        with self._lock:
            s = self.session
            model = s.predictor
            return {
                "status": s.status,
                "cursor": s.cursor,
                "speed": s.speed,
                "pid": s.pid.snapshot(),
                "metrics": s.metrics(),
                "last_tick": s.last_tick.to_dict() if s.last_tick else None,
                "series": {
                    "label": s.series.label,
                    "length": len(s.series),
                    "bucket_seconds": s.series.bucket_seconds,
                    "start_ts": s.series.start_ts,
                },
                "model": {
                    "window_len": model.window_len,
                    "horizon": getattr(model, "horizon", 1),
                    "config_hash": (model.config.hash()
                                    if hasattr(model, "config") else None),
                },
            }


class PidUpdate(BaseModel):
    enabled: bool | None = None
    kp: float | None = None
    ki: float | None = None
    kd: float | None = None


class ReplayCommand(BaseModel):
    action: str
    speed: float | None = None


def create_app(runner: SessionRunner | None, gain_max: float = DEFAULT_GAIN_MAX,
               cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="twinsync")
    app.state.runner = runner
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins if cors_origins is not None else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def get_runner() -> SessionRunner:
        if app.state.runner is None:
            raise HTTPException(503, "no session loaded")
        return app.state.runner

    @app.get("/api/state")
    def state():
        return get_runner().snapshot()

    @app.get("/api/stream")
    def stream():
        runner = get_runner()
        sub = runner.subscribe()

        def events():
            # short poll interval so the generator can wind down promptly
            # when the runner stops (a long blocking get would pin the worker)
            last_sent = time.monotonic()
            try:
                while not runner.stopped:
                    try:
                        tick = sub.get(timeout=0.25)
                    except queue.Empty:
                        if time.monotonic() - last_sent >= HEARTBEAT_SECONDS:
                            last_sent = time.monotonic()
                            yield ": heartbeat\n\n"
                        continue
                    last_sent = time.monotonic()
                    yield f"data: {json.dumps(tick.to_dict())}\n\n"
            finally:
                runner.unsubscribe(sub)

        return StreamingResponse(events(), media_type="text/event-stream")

    @app.post("/api/pid")
    def update_pid(body: PidUpdate):
        runner = get_runner()
        for name in ("kp", "ki", "kd"):
            v = getattr(body, name)
            if v is not None and not (0 <= v <= gain_max and v == v):
                raise HTTPException(422, f"{name} must be in [0, {gain_max}]")

        def apply(session: ReplaySession):
            if body.kp is not None or body.ki is not None or body.kd is not None:
                g = session.pid.gains
                session.control("pid_set_gains", PidGains(
                    kp=body.kp if body.kp is not None else g.kp,
                    ki=body.ki if body.ki is not None else g.ki,
                    kd=body.kd if body.kd is not None else g.kd,
                ))
            if body.enabled is True:
                session.control("pid_enable")
            elif body.enabled is False:
                session.control("pid_disable")

        runner.submit(apply)
        return runner.snapshot()

    @app.post("/api/replay")
    def replay(body: ReplayCommand):
        runner = get_runner()
        if body.action not in ("start", "pause", "reset"):
            raise HTTPException(422, f"unknown action {body.action!r}")

        def apply(session: ReplaySession):
            if body.speed is not None:
                session.control("set_speed", body.speed)
            session.control(body.action)

        try:
            runner.submit(apply)
        except InvalidCommand as exc:
            raise HTTPException(409, str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        return runner.snapshot()

    @app.get("/api/log")
    def log(from_step: int = Query(0, alias="from", ge=0)):
        runner = get_runner()
        if from_step > runner.live_edge():
            raise HTTPException(416, "requested step beyond live edge")
        return [t.to_dict() for t in runner.log_since(from_step)]

    return app
