import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from twinsync.ingest import TrafficSeries
from twinsync.pid import PidController, PidGains
from twinsync.service import SessionRunner, create_app
from twinsync.synchronizer import ReplaySession, metrics_from_ticks

from test_synchronizer import BiasedPredictor


def make_runner(n=80, bucket=0.001, speed=0.0, retention=10_000):
    rng = np.random.default_rng(5)
    series = TrafficSeries(0.0, bucket, rng.uniform(50, 150, n))
    session = ReplaySession(
        series, BiasedPredictor(5.0),
        pid=PidController(gains=PidGains(0.4, 0.05, 0), integral_limit=1e3),
        speed=speed)
    runner = SessionRunner(session, retention=retention)
    runner.start()
    return runner


@pytest.fixture
def client():
    runner = make_runner()
    c = TestClient(create_app(runner))
    yield c
    runner.stop()


def wait_for(client, status, timeout=5.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        snap = client.get("/api/state").json()
        if snap["status"] == status:
            return snap
        time.sleep(0.01)
    raise AssertionError(f"status {status} not reached, last: {snap['status']}")


class TestState:
    def test_fresh_session(self, client):
        snap = client.get("/api/state").json()
        assert snap["status"] == "idle"
        assert snap["cursor"] == 5  # window_len
        assert snap["pid"]["enabled"] is False
        assert snap["series"]["length"] == 80
        assert snap["model"]["window_len"] == 5

    def test_no_session_503(self):
        c = TestClient(create_app(None))
        assert c.get("/api/state").status_code == 503
        assert c.post("/api/pid", json={"enabled": True}).status_code == 503

    def test_metrics_match_log_recomputation(self, client):
        client.post("/api/replay", json={"action": "start"})
        wait_for(client, "finished")
        snap = client.get("/api/state").json()
        log = client.get("/api/log").json()
        from twinsync.synchronizer import SyncTick
        ticks = [SyncTick(**{**t, "pid_snapshot": t["pid_snapshot"]}) for t in log]
        recomputed = metrics_from_ticks(ticks)
        for k in ("mae_raw", "rmse_raw", "mae_adjusted", "rmse_adjusted"):
            assert snap["metrics"][k] == pytest.approx(recomputed[k], abs=1e-9)


class TestPidEndpoint:
    def test_enable(self, client):
        snap = client.post("/api/pid", json={"enabled": True}).json()
        assert snap["pid"]["enabled"] is True

    def test_partial_update_preserves_others(self, client):
        client.post("/api/pid", json={"ki": 0.07})
        snap = client.post("/api/pid", json={"kp": 0.5}).json()
        assert snap["pid"]["kp"] == 0.5
        assert snap["pid"]["ki"] == 0.07

    def test_negative_gain_422(self, client):
        assert client.post("/api/pid", json={"kp": -1}).status_code == 422

    def test_above_max_422(self, client):
        assert client.post("/api/pid", json={"kd": 1e6}).status_code == 422


class TestReplayEndpoint:
    def test_unknown_action_422(self, client):
        assert client.post("/api/replay", json={"action": "warp"}).status_code == 422

    def test_start_run_to_completion(self, client):
        snap = client.post("/api/replay", json={"action": "start", "speed": 0}).json()
        assert snap["status"] in ("running", "finished")
        snap = wait_for(client, "finished")
        assert snap["cursor"] == snap["series"]["length"]

    def test_start_on_finished_409(self, client):
        client.post("/api/replay", json={"action": "start", "speed": 0})
        wait_for(client, "finished")
        assert client.post("/api/replay", json={"action": "start"}).status_code == 409

    def test_reset_clears(self, client):
        client.post("/api/replay", json={"action": "start", "speed": 0})
        wait_for(client, "finished")
        snap = client.post("/api/replay", json={"action": "reset"}).json()
        assert snap["status"] == "idle"
        assert snap["metrics"]["ticks"] == 0
        assert snap["cursor"] == 5

    def test_pause(self, client):
        client.post("/api/replay", json={"action": "start", "speed": 0.01})
        snap = client.post("/api/replay", json={"action": "pause"}).json()
        assert snap["status"] == "paused"


class TestLogEndpoint:
    def test_fresh_log_empty(self, client):
        assert client.get("/api/log", params={"from": 0}).json() == []

    def test_beyond_live_edge_416(self, client):
        assert client.get("/api/log", params={"from": 10_000}).status_code == 416

    def test_full_log_after_run(self, client):
        client.post("/api/replay", json={"action": "start", "speed": 0})
        wait_for(client, "finished")
        log = client.get("/api/log").json()
        assert len(log) == 75  # 80 - window 5
        steps = [t["step"] for t in log]
        assert steps == sorted(steps)
        tail = client.get("/api/log", params={"from": 75}).json()
        assert [t["step"] for t in tail] == [75, 76, 77, 78, 79]

    def test_retention_cap(self):
        runner = make_runner(n=60, retention=10)
        try:
            c = TestClient(create_app(runner))
            c.post("/api/replay", json={"action": "start", "speed": 0})
            wait_for(c, "finished")
            assert len(c.get("/api/log").json()) == 10
        finally:
            runner.stop()


class TestStream:
    def test_two_subscribers_identical_and_increasing(self):
        runner = make_runner(n=50)
        try:
            q1 = runner.subscribe()
            q2 = runner.subscribe()
            runner.submit(lambda s: s.control("start"))
            seen1 = [q1.get(timeout=5).step for _ in range(45)]
            seen2 = [q2.get(timeout=5).step for _ in range(45)]
            assert seen1 == seen2
            assert seen1 == sorted(set(seen1))
        finally:
            runner.stop()

    def test_drop_oldest_under_backpressure(self):
        runner = make_runner(n=80)
        try:
            q = runner.subscribe(maxsize=4)  # deliberately tiny buffer
            runner.submit(lambda s: s.control("start"))
            deadline = time.time() + 5
            while runner.session.status != "finished" and time.time() < deadline:
                time.sleep(0.01)
            steps = []
            while not q.empty():
                steps.append(q.get_nowait().step)
            assert len(steps) == 4
            assert steps[-1] == 79  # newest ticks retained
        finally:
            runner.stop()

    def test_sse_wire_format_over_real_server(self):
        # TestClient buffers whole responses, so exercise the stream against
        # a real uvicorn server on an ephemeral port
        import socket
        import threading

        import httpx
        import uvicorn

        runner = make_runner(n=5000, bucket=1.0)
        runner.session.speed = 200.0
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        config = uvicorn.Config(create_app(runner), host="127.0.0.1", port=port,
                                log_level="error")
        server = uvicorn.Server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            deadline = time.time() + 10
            while not server.started and time.time() < deadline:
                time.sleep(0.02)
            assert server.started
            base = f"http://127.0.0.1:{port}"
            httpx.post(f"{base}/api/replay", json={"action": "start"}, timeout=5)
            events = []
            with httpx.stream("GET", f"{base}/api/stream", timeout=10) as resp:
                assert resp.headers["content-type"].startswith("text/event-stream")
                for line in resp.iter_lines():
                    if line.startswith("data: "):
                        events.append(json.loads(line[6:]))
                        if len(events) >= 5:
                            break
            steps = [e["step"] for e in events]
            assert steps == sorted(steps)
            assert all(set(e) >= {"step", "actual", "raw_pred", "adjusted_pred",
                                  "error_raw", "error_adjusted", "u_applied",
                                  "pid_snapshot"} for e in events)
        finally:
            server.should_exit = True
            runner.stop()
            thread.join(timeout=10)
