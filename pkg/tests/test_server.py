import json

import pytest
from fastapi.testclient import TestClient

from handwave.pipeline import PipelineSettings
from handwave.server import create_app


@pytest.fixture(scope="module")
def client(chirp, geometry, grid):
    settings = PipelineSettings(chirp=chirp, geometry=geometry, grid=grid)

    def factory(variant):
        if variant.startswith("fcnn"):
            raise FileNotFoundError("no model file configured")
        return settings

    app = create_app(factory)
    return TestClient(app)


def test_info_endpoint(client):
    res = client.get("/api/info")
    assert res.status_code == 200
    body = res.json()
    assert "dpf" in body["variants"]


def test_websocket_session_flow(client):
    with client.websocket_connect("/play?variant=simple&seed=1&noise_scale=0") as ws:
        hello = json.loads(ws.receive_text())
        assert hello["type"] == "session"
        assert hello["roi"]["z_max"] == 0.5
        assert len(hello["note_map"]["lanes"]) == 8

        ws.send_text(json.dumps({"type": "hand", "t": 0.0, "y": 0.0, "z": 0.325}))
        events = [json.loads(ws.receive_text()) for _ in range(2)]
        kinds = [e["kind"] for e in events]
        assert kinds == ["note_on", "param_change"]
        assert events[0]["note_id"] == 4

        # reconfigure to 4 lanes and keep playing
        ws.send_text(json.dumps({"type": "config", "mode": "quantized",
                                 "lanes": [{"z_lo": 0.1 + 0.1 * i,
                                            "z_hi": 0.2 + 0.1 * i,
                                            "note_id": 10 + i}
                                           for i in range(4)]}))
        ack = json.loads(ws.receive_text())
        assert ack["type"] == "ack" and ack["lanes"] == 4


def test_websocket_rejects_bad_messages(client):
    with client.websocket_connect("/play?variant=simple&noise_scale=0") as ws:
        ws.receive_text()
        ws.send_text("{not json")
        err = json.loads(ws.receive_text())
        assert err["type"] == "error"
        ws.send_text(json.dumps({"type": "mystery"}))
        err = json.loads(ws.receive_text())
        assert err["type"] == "error"
        # invalid note map lists problems
        ws.send_text(json.dumps({"type": "config", "mode": "quantized",
                                 "lanes": [{"z_lo": 0.1, "z_hi": 0.3, "note_id": 0},
                                           {"z_lo": 0.25, "z_hi": 0.5, "note_id": 1}]}))
        err = json.loads(ws.receive_text())
        assert err["type"] == "error"
        assert any("overlap" in p for p in err["problems"])


def test_websocket_unknown_variant_closes_with_error(client):
    with client.websocket_connect("/play?variant=fcnn-dpf") as ws:
        msg = json.loads(ws.receive_text())
        assert msg["type"] == "error"
        assert "model" in msg["error"]


def test_sessions_cleaned_up_after_disconnect(client):
    with client.websocket_connect("/play?variant=simple") as ws:
        ws.receive_text()
        assert client.get("/api/info").json()["sessions"] == 1
    assert client.get("/api/info").json()["sessions"] == 0
