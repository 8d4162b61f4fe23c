import numpy as np
import pytest
from fastapi.testclient import TestClient

from contactdyn.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def rest_run(client):
    r = client.post("/simulate", json={
        "preset": "rest", "overrides": {"duration": 0.4}})
    assert r.status_code == 200
    return r.json()["run"]


def test_health(client):
    body = TestClient(app).get("/health").json()
    assert body["status"] == "ok"


def test_presets_listing(client):
    names = [p["name"] for p in client.get("/presets").json()["presets"]]
    assert names == ["carry", "incline", "pendulum", "rest"]


def test_simulate_endpoint(client, rest_run):
    assert len(rest_run["trajectory"]["human"]) == 401
    assert rest_run["solution"] is not None


def test_simulate_unknown_preset_is_422(client):
    r = client.post("/simulate", json={"preset": "zzz"})
    assert r.status_code == 422
    assert "unknown preset" in r.json()["detail"]


def test_validation_error_is_422(client):
    r = client.post("/solve", json={"run": {"version": 1}})
    assert r.status_code == 422


def test_residual_endpoint(client, rest_run):
    r = client.post("/residual", json={"run": rest_run})
    assert r.status_code == 200
    body = r.json()
    assert body["aggregate"] >= 0.0
    assert len(body["frame_norms_h"]) == 401
    assert body["csv"].startswith("frame,")


def test_solve_endpoint_fills_solution(client, rest_run):
    r = client.post("/solve", json={
        "run": rest_run,
        "options": {"start_frame": 340, "end_frame": 370},
    })
    assert r.status_code == 200
    body = r.json()
    assert body["converged"] is True
    tau = np.asarray(body["run"]["solution"]["tau"])
    assert tau.shape == (30, 6)
    history = body["objective_history"]
    assert all(a >= b - 1e-9 for a, b in zip(history, history[1:]))


def test_metrics_endpoint(client, rest_run):
    r = client.post("/metrics", json={"pred": rest_run, "gt": rest_run})
    assert r.status_code == 200
    report = r.json()["report"]
    assert report["mpjpe"] == 0.0
    assert report["scene_pen"] == 0.0


def test_metrics_mismatch_is_422(client, rest_run):
    short = dict(rest_run)
    short = {**rest_run, "trajectory": {
        **rest_run["trajectory"],
        "human": rest_run["trajectory"]["human"][:-3],
    }}
    r = client.post("/metrics", json={"pred": short, "gt": rest_run})
    assert r.status_code == 422


def test_gradcheck_endpoint(client, rest_run):
    r = client.post("/gradcheck", json={"run": rest_run, "samples": 5, "seed": 4})
    assert r.status_code == 200
    assert r.json()["max_relative_error"] <= 1e-4
