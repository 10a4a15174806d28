import math

import numpy as np
import pytest

from twinsync.errors import Exhausted, InvalidCommand, TooShort
from twinsync.ingest import TrafficSeries
from twinsync.pid import AutoTuner, PidController, PidGains
from twinsync.synchronizer import (
    CachedPredictor,
    ReplaySession,
    export_csv,
    metrics_from_ticks,
    run_offline,
    run_session,
    sweep_gains,
)


class ConstPredictor:
    """Always predicts a fixed value."""

    window_len = 5
    horizon = 1

    def __init__(self, value):
        self.value = value

    def predict(self, window):
        return np.array([self.value])


class BiasedPredictor:
    """Predicts last observed + bias: a plant with constant offset."""

    window_len = 5
    horizon = 1

    def __init__(self, bias):
        self.bias = bias

    def predict(self, window):
        return np.array([float(window[-1]) + self.bias])


def const_series(n=60, value=100.0, bucket=1.0):
    return TrafficSeries(0.0, bucket, np.full(n, value))


def noisy_series(n=80, seed=0, bucket=1.0):
    rng = np.random.default_rng(seed)
    return TrafficSeries(0.0, bucket, rng.uniform(50, 150, n))


class TestTick:
    def test_pid_disabled_pass_through(self):
        s = noisy_series()
        ticks, _ = run_offline(s, BiasedPredictor(5.0), PidGains(1, 1, 0),
                               enable_at_step=math.inf)
        for t in ticks:
            assert t.adjusted_pred == t.raw_pred
            assert t.error_adjusted == t.error_raw
            assert t.u_applied == 0.0

    def test_perfect_twin_zero_errors(self):
        s = const_series(value=42.0)
        ticks, _ = run_offline(s, ConstPredictor(42.0), PidGains(1, 0, 0),
                               enable_at_step=math.inf)
        assert all(t.error_raw == 0.0 and t.error_adjusted == 0.0 for t in ticks)

    def test_bias_corrected_in_closed_loop(self):
        s = const_series(n=120)
        ticks, _ = run_offline(s, BiasedPredictor(10.0), PidGains(0.5, 0.5, 0),
                               enable_at_step=20, integral_limit=1e3,
                               error_source="adjusted")
        post = [t for t in ticks if t.step >= 80]
        assert all(abs(t.error_adjusted) < 1.0 for t in post)
        assert all(abs(abs(t.error_raw) - 10.0) < 0.5 for t in post)

    def test_adjusted_is_clamped_sum(self):
        s = noisy_series()
        ticks, _ = run_offline(s, BiasedPredictor(30.0), PidGains(2, 1, 0),
                               enable_at_step=10)
        for t in ticks:
            assert t.adjusted_pred == max(0.0, t.raw_pred + t.u_applied)

    def test_warm_up_no_early_ticks(self):
        s = noisy_series()
        ticks, _ = run_offline(s, ConstPredictor(1.0), PidGains(1, 0, 0))
        assert min(t.step for t in ticks) == ConstPredictor.window_len
        assert len(ticks) == len(s) - ConstPredictor.window_len

    def test_exhausted(self):
        session = ReplaySession(const_series(n=10), ConstPredictor(1.0), speed=0)
        session.control("start")
        for _ in range(5):
            session.tick()
        assert session.status == "finished"
        with pytest.raises(Exhausted):
            session.tick()


class TestControl:
    def test_enable_latency_one_tick(self):
        session = ReplaySession(noisy_series(), BiasedPredictor(10.0),
                                pid=PidController(gains=PidGains(1, 0, 0),
                                                  integral_limit=1e3),
                                speed=0)
        session.control("start")
        session.tick()
        session.control("pid_enable")
        t = session.tick()
        assert t.pid_snapshot["enabled"] is True
        assert t.u_applied == 0.0  # correction computed this tick applies next
        t2 = session.tick()
        assert t2.u_applied != 0.0

    def test_disable_zeroes_pending_correction(self):
        session = ReplaySession(noisy_series(), BiasedPredictor(10.0),
                                pid=PidController(gains=PidGains(1, 0, 0),
                                                  integral_limit=1e3),
                                speed=0)
        session.control("start")
        session.control("pid_enable")
        session.tick()
        session.tick()
        session.control("pid_disable")
        t = session.tick()
        assert t.u_applied == 0.0
        assert t.pid_snapshot["enabled"] is False

    def test_reset(self):
        session = ReplaySession(noisy_series(), ConstPredictor(1.0), speed=0)
        session.control("start")
        session.control("pid_enable")
        for _ in range(10):
            session.tick()
        session.control("reset")
        assert session.cursor == session.window_len
        assert session.status == "idle"
        assert session.metrics()["ticks"] == 0
        assert session.pid.enabled is False

    def test_set_speed_and_invalid(self):
        session = ReplaySession(noisy_series(), ConstPredictor(1.0))
        session.control("set_speed", 0.0)
        assert session.speed == 0.0
        with pytest.raises(InvalidCommand):
            session.control("set_speed", -1)
        with pytest.raises(InvalidCommand):
            session.control("warp")

    def test_start_after_finish_requires_reset(self):
        session = ReplaySession(const_series(n=10), ConstPredictor(1.0), speed=0)
        run_session(session)
        assert session.status == "finished"
        with pytest.raises(InvalidCommand):
            session.control("start")
        session.control("reset")
        session.control("start")
        assert session.status == "running"

    def test_gains_update_mid_run(self):
        session = ReplaySession(noisy_series(), BiasedPredictor(10.0),
                                pid=PidController(integral_limit=1e3), speed=0)
        session.control("start")
        session.control("pid_enable")
        session.tick()
        session.control("pid_set_gains", PidGains(2, 0, 0))
        session.tick()
        t = session.tick()
        assert t.pid_snapshot["kp"] == 2


class TestOffline:
    def test_too_short(self):
        with pytest.raises(TooShort):
            run_offline(const_series(n=6), ConstPredictor(1.0), PidGains(1, 0, 0))

    def test_never_enabled_metrics_equal(self):
        s = noisy_series()
        _, summary = run_offline(s, BiasedPredictor(3.0), PidGains(1, 1, 0),
                                 enable_at_step=math.inf)
        m = summary["overall"]
        assert m["mae_adjusted"] == m["mae_raw"]
        assert m["rmse_adjusted"] == m["rmse_raw"]

    def test_metrics_recomputable_from_ticks(self):
        s = noisy_series()
        session = ReplaySession(s, BiasedPredictor(5.0),
                                pid=PidController(gains=PidGains(0.4, 0.05, 0),
                                                  integral_limit=1e3),
                                speed=0)
        ticks = run_session(session, [(10, "pid_enable")])
        recomputed = metrics_from_ticks(ticks)
        live = session.metrics()
        for k in ("mae_raw", "rmse_raw", "mae_adjusted", "rmse_adjusted"):
            assert live[k] == pytest.approx(recomputed[k], abs=1e-9)

    def test_causality_u_from_past_errors_only(self):
        s = noisy_series(seed=7)
        gains = PidGains(0.4, 0.1, 0.2)
        ticks, _ = run_offline(s, BiasedPredictor(4.0), gains,
                               enable_at_step=0, integral_limit=1e3)
        # replay the controller over the logged raw errors, one step behind
        pid = PidController(gains=gains, integral_limit=1e3)
        pid.activate()
        expected_u = 0.0
        for t in ticks:
            assert t.u_applied == pytest.approx(expected_u, abs=1e-12)
            expected_u = pid.step(t.error_raw, s.bucket_seconds)

    def test_live_and_offline_logs_identical(self):
        # tiny buckets keep the paced run fast; arithmetic must not differ
        s = noisy_series(n=60, bucket=0.002)
        pred = BiasedPredictor(5.0)
        script = [(15, "pid_enable"), (40, "pid_set_gains", PidGains(0.8, 0.1, 0))]

        def run_at(speed):
            session = ReplaySession(
                s, pred, pid=PidController(gains=PidGains(0.4, 0.05, 0),
                                           integral_limit=1e3),
                speed=speed)
            return run_session(session, list(script))

        assert run_at(0.0) == run_at(1.0)

    def test_sweep_returns_best_by_adjusted_mae(self):
        # bias dominates the noise, so proportional correction must help
        rng = np.random.default_rng(3)
        s = TrafficSeries(0.0, 1.0, rng.uniform(98, 102, 70))
        grid = [PidGains(0.0, 0, 0), PidGains(0.5, 0, 0)]
        best, results = sweep_gains(s, BiasedPredictor(50.0), enable_at_step=10,
                                    grid=grid)
        assert len(results) == 2
        by_gains = {r["gains"]: r["mae_adjusted"] for r in results}
        assert by_gains[best] == min(by_gains.values())
        # constant bias + proportional correction must beat doing nothing
        assert best == PidGains(0.5, 0, 0)

    def test_cached_predictor_matches_direct(self):
        s = noisy_series(n=50)
        pred = BiasedPredictor(2.0)
        direct, _ = run_offline(s, pred, PidGains(0.4, 0.05, 0), enable_at_step=10)
        cached, _ = run_offline(s, CachedPredictor(s, pred),
                                PidGains(0.4, 0.05, 0), enable_at_step=10)
        assert direct == cached

    def test_autotune_adjusts_gains(self):
        s = noisy_series(n=200)
        session = ReplaySession(s, BiasedPredictor(10.0),
                                pid=PidController(gains=PidGains(0.2, 0, 0),
                                                  integral_limit=1e3),
                                speed=0, autotuner=AutoTuner(), autotune_window=20)
        ticks = run_session(session, [(5, "pid_enable")])
        gains_seen = {(t.pid_snapshot["kp"], t.pid_snapshot["ki"], t.pid_snapshot["kd"])
                      for t in ticks}
        assert len(gains_seen) > 1


class TestExport:
    def test_csv_columns_and_rows(self):
        s = noisy_series(n=30)
        ticks, _ = run_offline(s, ConstPredictor(100.0), PidGains(0.4, 0, 0),
                               enable_at_step=10)
        out = export_csv(ticks).decode().splitlines()
        assert out[0] == ("step,t,actual,raw_pred,adjusted_pred,error_raw,"
                          "error_adjusted,u_applied,pid_enabled,kp,ki,kd")
        assert len(out) == len(ticks) + 1
        first = out[1].split(",")
        assert int(first[0]) == ticks[0].step
        assert float(first[2]) == ticks[0].actual
