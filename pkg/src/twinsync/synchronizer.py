"""Real-time prediction-and-control replay loop.

Timing rule: the prediction for step t is computed at step t-1 from the
trailing window of actual values (teacher forcing), and the correction u
embedded in step t's adjusted prediction was produced from step t-1's error.
This one-tick latency is what makes the loop causal.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import Exhausted, InvalidCommand, TooShort
from .ingest import TrafficSeries
from .pid import PidController, PidGains, apply_correction


@dataclass(frozen=True)
class SyncTick:
    step: int
    t_seconds: float
    actual: float
    raw_pred: float
    adjusted_pred: float
    error_raw: float
    error_adjusted: float
    u_applied: float
    pid_snapshot: dict

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "t_seconds": self.t_seconds,
            "actual": self.actual,
            "raw_pred": self.raw_pred,
            "adjusted_pred": self.adjusted_pred,
            "error_raw": self.error_raw,
            "error_adjusted": self.error_adjusted,
            "u_applied": self.u_applied,
            "pid_snapshot": self.pid_snapshot,
        }


class CachedPredictor:
    """Precomputes every teacher-forced one-step prediction for a series.

    Uses the wrapped model's own single-window predict path so cached replays
    are bit-identical to uncached ones. Useful for gain sweeps where the raw
    predictions do not depend on the controller.
    """

    def __init__(self, series: TrafficSeries, model):
        self.window_len = model.window_len
        self.horizon = getattr(model, "horizon", 1)
        w = self.window_len
        self._first = w
        self._preds = [
            model.predict(series.values[i - w : i])
            for i in range(w, len(series) + 1)
        ]


def _predict_one(predictor, series: TrafficSeries, end: int) -> float:
    """Prediction for step `end` from the window ending at end-1."""
    w = predictor.window_len
    if isinstance(predictor, CachedPredictor):
        return float(predictor._preds[end - w][0])
    return float(predictor.predict(series.values[end - w : end])[0])


def default_integral_limit(series: TrafficSeries) -> float:
    """10x the series standard deviation (in pps*s), floored for flat series."""
    return max(10.0 * float(np.std(series.values)), 1e3)


class ReplaySession:
    """One replayed series + forecaster + PID corrector and its metrics."""

    def __init__(self, series: TrafficSeries, predictor, pid: PidController | None = None,
                 speed: float = 1.0, error_source: str = "raw", rolling_k: int = 300,
                 autotuner=None, autotune_window: int = 30):
        if len(series) <= predictor.window_len + 2:
            raise TooShort(
                f"series of {len(series)} points too short for window {predictor.window_len}"
            )
        if error_source not in ("raw", "adjusted"):
            raise ValueError("error_source must be 'raw' or 'adjusted'")
        self.series = series
        self.predictor = predictor
        self.pid = pid if pid is not None else PidController(
            integral_limit=default_integral_limit(series))
        self.speed = float(speed)
        self.error_source = error_source
        self.status = "idle"
        self.autotuner = autotuner
        self.autotune_window = autotune_window
        self.rolling = deque(maxlen=rolling_k)
        self.last_tick: SyncTick | None = None
        self._reset_position()

    @property
    def window_len(self) -> int:
        return self.predictor.window_len

    @property
    def cursor(self) -> int:
        return self._cursor

    def _reset_position(self):
        self._cursor = self.window_len
        self._pending_pred = _predict_one(self.predictor, self.series, self._cursor)
        self._pending_u = 0.0
        self._n = 0
        self._sums = {"abs_raw": 0.0, "sq_raw": 0.0, "abs_adj": 0.0, "sq_adj": 0.0}
        self.rolling.clear()
        self.last_tick = None

    def tick(self) -> SyncTick:
        if self._cursor >= len(self.series):
            self.status = "finished"
            raise Exhausted("series exhausted; reset to replay again")
        c = self._cursor
        actual = float(self.series.values[c])
        raw_pred = self._pending_pred
        u_applied = self._pending_u
        adjusted = apply_correction(raw_pred, u_applied)
        error_raw = actual - raw_pred
        error_adjusted = actual - adjusted

        if self.pid.enabled:
            err_in = error_adjusted if self.error_source == "adjusted" else error_raw
            self._pending_u = self.pid.step(err_in, dt=self.series.bucket_seconds)
        else:
            self._pending_u = 0.0

        if c + 1 <= len(self.series):
            self._pending_pred = _predict_one(self.predictor, self.series, c + 1)

        tick = SyncTick(
            step=c,
            t_seconds=self.series.start_ts + c * self.series.bucket_seconds,
            actual=actual,
            raw_pred=raw_pred,
            adjusted_pred=adjusted,
            error_raw=error_raw,
            error_adjusted=error_adjusted,
            u_applied=u_applied,
            pid_snapshot=self.pid.snapshot(),
        )
        self._n += 1
        self._sums["abs_raw"] += abs(error_raw)
        self._sums["sq_raw"] += error_raw**2
        self._sums["abs_adj"] += abs(error_adjusted)
        self._sums["sq_adj"] += error_adjusted**2
        self.rolling.append(tick)
        self.last_tick = tick
        if (self.autotuner is not None and self.pid.enabled
                and self._n % self.autotune_window == 0):
            recent = list(self.rolling)[-self.autotune_window:]
            window_mae = float(np.mean([abs(t.error_adjusted) for t in recent]))
            self.pid.set_gains(self.autotuner.step(self.pid.gains, window_mae))
        self._cursor += 1
        if self._cursor >= len(self.series):
            self.status = "finished"
        return tick

    def metrics(self) -> dict:
        n = max(self._n, 1)
        return {
            "ticks": self._n,
            "mae_raw": self._sums["abs_raw"] / n,
            "rmse_raw": (self._sums["sq_raw"] / n) ** 0.5,
            "mae_adjusted": self._sums["abs_adj"] / n,
            "rmse_adjusted": (self._sums["sq_adj"] / n) ** 0.5,
        }

    def control(self, command: str, value=None) -> None:
        """Transport and PID commands, applied between ticks."""
        if command == "start":
            if self.status == "finished":
                raise InvalidCommand("session finished; reset before starting")
            self.status = "running"
        elif command == "pause":
            if self.status == "running":
                self.status = "paused"
        elif command == "reset":
            self.pid.deactivate()
            self._reset_position()
            self.status = "idle"
        elif command == "set_speed":
            if value is None or value < 0:
                raise InvalidCommand("set_speed requires a value >= 0")
            self.speed = float(value)
        elif command == "pid_enable":
            self.pid.activate()
        elif command == "pid_disable":
            self.pid.deactivate()
            self._pending_u = 0.0  # a queued correction must not outlive the controller
        elif command == "pid_set_gains":
            if not isinstance(value, PidGains):
                raise InvalidCommand("pid_set_gains requires PidGains")
            self.pid.set_gains(value)
        else:
            raise InvalidCommand(f"unknown command {command!r}")


def run_session(session: ReplaySession, script=None) -> list[SyncTick]:
    """Drive a session to completion, applying scripted (step, command, value)
    entries at tick boundaries. speed > 0 paces against absolute deadlines so
    drift does not accumulate; speed 0 runs unpaced."""
    script = sorted(script or [], key=lambda e: e[0])
    si = 0
    ticks = []
    session.control("start")
    t0 = time.monotonic()
    paced = 0
    period_speed = session.speed
    while session.status == "running":
        while si < len(script) and script[si][0] <= session.cursor:
            _, cmd, *val = script[si]
            session.control(cmd, val[0] if val else None)
            si += 1
        if session.status != "running":
            break
        try:
            ticks.append(session.tick())
        except Exhausted:
            break
        if session.speed > 0:
            if session.speed != period_speed:  # rebase deadlines on speed change
                t0 = time.monotonic()
                paced = 0
                period_speed = session.speed
            paced += 1
            deadline = t0 + paced * session.series.bucket_seconds / session.speed
            delay = deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
    return ticks


def metrics_from_ticks(ticks: list[SyncTick], from_step: int = 0) -> dict:
    sel = [t for t in ticks if t.step >= from_step]
    if not sel:
        return {"ticks": 0, "mae_raw": 0.0, "rmse_raw": 0.0,
                "mae_adjusted": 0.0, "rmse_adjusted": 0.0}
    er = np.array([t.error_raw for t in sel])
    ea = np.array([t.error_adjusted for t in sel])
    return {
        "ticks": len(sel),
        "mae_raw": float(np.mean(np.abs(er))),
        "rmse_raw": float(np.sqrt(np.mean(er**2))),
        "mae_adjusted": float(np.mean(np.abs(ea))),
        "rmse_adjusted": float(np.sqrt(np.mean(ea**2))),
    }


def run_offline(series: TrafficSeries, predictor, gains: PidGains,
                enable_at_step: int | float = 0, integral_limit: float | None = None,
                error_source: str = "raw") -> tuple[list[SyncTick], dict]:
    """Unpaced replay with PID activation at a given step.

    Returns the full tick log and summary metrics for the raw and adjusted
    streams, overall and post-activation-only.
    """
    if len(series) <= predictor.window_len + 2:
        raise TooShort("series too short for offline replay")
    limit = integral_limit if integral_limit is not None else default_integral_limit(series)
    pid = PidController(gains=gains, integral_limit=limit)
    session = ReplaySession(series, predictor, pid=pid, speed=0.0,
                            error_source=error_source)
    script = []
    if np.isfinite(enable_at_step):
        script.append((max(int(enable_at_step), session.window_len), "pid_enable"))
    ticks = run_session(session, script)
    post_from = script[0][0] if script else len(series)  # inf => no adjusted regime
    summary = {
        "overall": metrics_from_ticks(ticks),
        "post_activation": metrics_from_ticks(ticks, from_step=post_from),
        "enable_at_step": script[0][0] if script else None,
    }
    return ticks, summary


DEFAULT_SWEEP_GRID = [
    PidGains(kp, ki, kd)
    for kp in (0.1, 0.2, 0.4, 0.6, 0.8)
    for ki in (0.0, 0.02, 0.05)
    for kd in (0.0, 0.05)
]


def sweep_gains(series: TrafficSeries, model, enable_at_step: int,
                grid=None, error_source: str = "raw") -> tuple[PidGains, list[dict]]:
    """Coarse grid sweep; best gains = lowest post-activation adjusted MAE.

    Predictions are cached once (they do not depend on the gains), so the
    sweep cost is controller arithmetic only.
    """
    cached = CachedPredictor(series, model)
    results = []
    best = None
    for gains in (grid or DEFAULT_SWEEP_GRID):
        _, summary = run_offline(series, cached, gains, enable_at_step,
                                 error_source=error_source)
        row = {"gains": gains, **summary["post_activation"]}
        results.append(row)
        if best is None or row["mae_adjusted"] < best["mae_adjusted"]:
            best = row
    return best["gains"], results


def export_csv(ticks: list[SyncTick]) -> bytes:
    lines = ["step,t,actual,raw_pred,adjusted_pred,error_raw,error_adjusted,"
             "u_applied,pid_enabled,kp,ki,kd"]
    for t in ticks:
        s = t.pid_snapshot
        lines.append(
            f"{t.step},{t.t_seconds!r},{t.actual!r},{t.raw_pred!r},"
            f"{t.adjusted_pred!r},{t.error_raw!r},{t.error_adjusted!r},"
            f"{t.u_applied!r},{int(s['enabled'])},{s['kp']!r},{s['ki']!r},{s['kd']!r}"
        )
    return ("\n".join(lines) + "\n").encode("utf-8")
