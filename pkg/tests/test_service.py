from __future__ import annotations

import json
import socket
import threading
import time

import httpx
import pytest
from fastapi.testclient import TestClient

from setsense.classify import TacticLabel
from setsense.config import DEFAULT_CALIBRATION_IMAGE, EngineConfig
from setsense.detect import detection_stream_lines
from setsense.rotation import RoundKey, Team
from setsense.service import create_app
from setsense.session import SessionManager
from setsense.simulate import NoiseConfig, default_templates, generate_round

SESSION_BODY = {
    "calibration": dict(DEFAULT_CALIBRATION_IMAGE),
    "coefficients": {"q": 1.2, "m": 1.5, "s": 1.0, "c": 0.9},
    "initial_positions": [[4, 2]],
    "filter_mode": "plus",
}


def _wire_detections(config: EngineConfig, key: RoundKey, seed: int = 5) -> list[dict]:
    template = default_templates(config.calibration)[TacticLabel.QUICK]
    round_ = generate_round(template, NoiseConfig(seed=seed), config.calibration, key)
    height = config.calibration.frame_height
    return [json.loads(line) for line in detection_stream_lines(round_.records, height)]


@pytest.fixture
def client():
    return TestClient(create_app(SessionManager()))


class TestSessionEndpoints:
    def test_create_session(self, client):
        response = client.post("/sessions", json=SESSION_BODY)
        assert response.status_code == 201
        body = response.json()
        assert body["session_id"]
        assert body["config"]["session"]["filter_mode"] == "plus"

    def test_create_with_bad_calibration(self, client):
        bad = dict(SESSION_BODY, calibration={"lnx": 900, "rnx": 100, "uny": 180, "lny": 480, "frame_height": 720})
        assert client.post("/sessions", json=bad).status_code == 400

    def test_duplicate_session_id(self, client):
        body = dict(SESSION_BODY, session_id="match1")
        assert client.post("/sessions", json=body).status_code == 201
        assert client.post("/sessions", json=body).status_code == 409

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/ghost/stats").status_code == 404
        assert client.get("/sessions/ghost/rounds").status_code == 404
        assert client.get("/sessions/ghost/events").status_code == 404
        assert (
            client.post(
                "/sessions/ghost/rounds",
                json={"score": 1, "round": 1, "team": "b", "detections": []},
            ).status_code
            == 404
        )


class TestRoundSubmission:
    def _create(self, client) -> str:
        return client.post("/sessions", json=SESSION_BODY).json()["session_id"]

    def test_submit_simulated_quick_round(self, client, config):
        sid = self._create(client)
        detections = _wire_detections(config, RoundKey(1, 1, Team.B))
        response = client.post(
            f"/sessions/{sid}/rounds",
            json={"score": 1, "round": 1, "team": "b", "detections": detections},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["label"] == "quick"
        assert body["round_key"] == "1_1_b"
        assert body["processing_ms"] >= 0

    def test_duplicate_round_conflict(self, client, config):
        sid = self._create(client)
        detections = _wire_detections(config, RoundKey(1, 1, Team.B))
        payload = {"score": 1, "round": 1, "team": "b", "detections": detections}
        assert client.post(f"/sessions/{sid}/rounds", json=payload).status_code == 200
        assert client.post(f"/sessions/{sid}/rounds", json=payload).status_code == 409

    def test_malformed_detections_rejected(self, client):
        sid = self._create(client)
        response = client.post(
            f"/sessions/{sid}/rounds",
            json={"score": 1, "round": 1, "team": "b", "detections": [{"frame": 0}]},
        )
        assert response.status_code == 400
        assert "detections[0]" in response.json()["detail"]

    def test_bad_team_rejected(self, client):
        sid = self._create(client)
        response = client.post(
            f"/sessions/{sid}/rounds",
            json={"score": 1, "round": 1, "team": "x", "detections": []},
        )
        assert response.status_code == 400

    def test_stats_and_history_reflect_submissions(self, client, config):
        sid = self._create(client)
        for i, team in enumerate(["b", "a", "b"], start=1):
            key = RoundKey(i, 1, Team(team))
            detections = _wire_detections(config, key, seed=10 + i)
            response = client.post(
                f"/sessions/{sid}/rounds",
                json={"score": i, "round": 1, "team": team, "detections": detections},
            )
            assert response.status_code == 200
        stats = client.get(f"/sessions/{sid}/stats").json()
        assert stats["rounds_total"] == 3
        assert stats["teams"]["b"]["counts"]["quick"] == 2
        assert stats["teams"]["a"]["counts"]["quick"] == 1
        history = client.get(f"/sessions/{sid}/rounds").json()["rounds"]
        assert [r["round_key"] for r in history] == ["1_1_b", "2_1_a", "3_1_b"]


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class TestEventStream:
    def test_round_result_event_reaches_subscriber(self, config):
        import uvicorn

        manager = SessionManager()
        app = create_app(manager)
        port = _free_port()
        server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
        )
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            deadline = time.time() + 10
            while not server.started:
                if time.time() > deadline:
                    pytest.fail("server did not start")
                time.sleep(0.02)
            base = f"http://127.0.0.1:{port}"
            with httpx.Client(base_url=base, timeout=10.0) as http:
                sid = http.post("/sessions", json=SESSION_BODY).json()["session_id"]
                detections = _wire_detections(config, RoundKey(1, 1, Team.B))

                received = {}

                def submit_later():
                    time.sleep(0.3)
                    http.post(
                        f"/sessions/{sid}/rounds",
                        json={"score": 1, "round": 1, "team": "b", "detections": detections},
                    )

                submitter = threading.Thread(target=submit_later, daemon=True)
                started = time.perf_counter()
                with httpx.stream("GET", f"{base}/sessions/{sid}/events", timeout=10.0) as stream:
                    assert stream.headers["content-type"].startswith("text/event-stream")
                    submitter.start()
                    event_name = None
                    for line in stream.iter_lines():
                        if line.startswith("event:"):
                            event_name = line.split(":", 1)[1].strip()
                        elif line.startswith("data:") and event_name == "round_result":
                            received = json.loads(line.split(":", 1)[1])
                            break
                elapsed = time.perf_counter() - started
                submitter.join()
            assert received["label"] == "quick"
            assert received["round_key"] == "1_1_b"
            assert elapsed < 5.0
        finally:
            server.should_exit = True
            thread.join(timeout=5)
