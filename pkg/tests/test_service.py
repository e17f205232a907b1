"""Live session HTTP service: replay parity with batch, ordering, errors."""

from __future__ import annotations

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from turnpoint.ingest import record_to_dict
from turnpoint.service import create_app
from turnpoint.service.registry import ModelRegistry, toy_bundle

from conftest import TOY_LABELS, TOY_P_A, TOY_P_B


def consistent_matrix(n: int, seed: int) -> list[list[float]]:
    rng = np.random.default_rng(seed)
    w = rng.uniform(1.0, 2.5, size=n)
    return (w[:, None] / w[None, :]).tolist()


def record_to_event(record) -> dict:
    body = record_to_dict(record)
    body.pop("match_id")
    return body


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


@pytest.fixture(scope="module")
def toy_events(toy_records):
    return [record_to_event(r) for r in toy_records]


def new_session(client, length_hint=10, **overrides) -> dict:
    body = {"player_a": "Alpha", "player_b": "Beta", "length_hint": length_hint}
    body.update(overrides)
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 201, resp.text
    return resp.json()["session"]


@pytest.fixture(scope="module")
def replayed(client, toy_events):
    """One session with the whole fixture match posted, snapshots kept."""
    session = new_session(client)
    snapshots = []
    for event in toy_events:
        resp = client.post(f"/sessions/{session['session_id']}/points", json=event)
        assert resp.status_code == 200, resp.text
        snapshots.append(resp.json())
    return session, snapshots


class TestMeta:
    def test_root_lists_endpoints(self, client):
        doc = client.get("/").json()
        assert doc["service"] == "turnpoint"
        assert doc["schema_version"] == 1
        assert "POST /sessions" in doc["endpoints"]

    def test_models_lists_bundled_forest(self, client):
        doc = client.get("/models").json()
        assert doc["schema_version"] == 1
        (info,) = [m for m in doc["models"] if m["model_id"] == "toy-forest"]
        assert info["kind"] == "forest"
        assert info["n_features"] == 14
        assert info["description"]

    def test_create_session_meta(self, client):
        session = new_session(client, length_hint=10)
        assert session["player_a"] == "Alpha"
        assert session["model_id"] == "toy-forest"
        assert session["weight_source"] == "preset:wimbledon-2023-1301"
        assert session["stage_boundary"] == 5
        assert session["length_hint"] == 10
        assert session["n_points"] == 0
        assert len(session["session_id"]) == 12

    def test_boundary_follows_length_hint(self, client):
        assert new_session(client, length_hint=9)["stage_boundary"] == 5
        assert new_session(client, length_hint=300)["stage_boundary"] == 150

    def test_unknown_model_404(self, client):
        resp = client.post(
            "/sessions",
            json={"player_a": "A", "player_b": "B", "model_id": "nonesuch"},
        )
        assert resp.status_code == 404

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/feedfeed/state").status_code == 404
        assert client.get("/sessions/feedfeed/log").status_code == 404
        assert client.delete("/sessions/feedfeed/points/last").status_code == 404

    def test_unknown_preset_422(self, client):
        resp = client.post(
            "/sessions",
            json={"player_a": "A", "player_b": "B", "weight_preset": "us-open"},
        )
        assert resp.status_code == 422

    def test_judgment_route_session(self, client):
        session = new_session(
            client,
            judgment_early=consistent_matrix(14, seed=1),
            judgment_late=consistent_matrix(14, seed=2),
        )
        assert session["weight_source"] == "judgment+frozen-entropy"

    def test_inconsistent_judgment_422(self, client):
        circular = [[1, 3, 1 / 3], [1 / 3, 1, 3], [3, 1 / 3, 1]]
        resp = client.post(
            "/sessions",
            json={
                "player_a": "A",
                "player_b": "B",
                "judgment_early": circular,
                "judgment_late": circular,
            },
        )
        assert resp.status_code == 422
        assert "consisten" in resp.json()["detail"]

    def test_wrong_dimension_judgment_422(self, client):
        small = consistent_matrix(3, seed=3)
        resp = client.post(
            "/sessions",
            json={
                "player_a": "A",
                "player_b": "B",
                "judgment_early": small,
                "judgment_late": small,
            },
        )
        assert resp.status_code == 422

    def test_judgment_matrices_must_come_together(self, client):
        resp = client.post(
            "/sessions",
            json={"player_a": "A", "player_b": "B", "judgment_early": consistent_matrix(14, 4)},
        )
        assert resp.status_code == 422

    def test_duplicate_model_ids_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            ModelRegistry([toy_bundle(), toy_bundle()])


class TestReplayParity:
    def test_snapshots_march_through_batch_series(self, replayed):
        _, snapshots = replayed
        for t, snap in enumerate(snapshots):
            assert snap["schema_version"] == 1
            assert snap["unit"] == t + 1
            assert snap["p_a"] == TOY_P_A[t]
            assert snap["p_b"] == TOY_P_B[t]
            assert snap["delta"] == TOY_P_A[t] - TOY_P_B[t]
            assert snap["turned"] is bool(TOY_LABELS[t])

    def test_turned_flags(self, replayed):
        _, snapshots = replayed
        expected = [False, False, True, False, False, True, False, False, False, True]
        assert [s["turned"] for s in snapshots] == expected

    def test_state_series_equals_batch_artifacts(self, client, replayed):
        session, _ = replayed
        doc = client.get(f"/sessions/{session['session_id']}/state").json()
        series = doc["series"]
        assert series["point_index"] == list(range(1, 11))
        assert series["p_a"] == list(TOY_P_A)
        assert series["p_b"] == list(TOY_P_B)
        assert series["labels"] == TOY_LABELS.tolist()
        assert series["diff"] == [a - b for a, b in zip(TOY_P_A, TOY_P_B)]
        assert doc["session"]["n_points"] == 10

    def test_risk_equals_direct_model_scores(self, client, replayed, toy_standardized):
        session, snapshots = replayed
        expected = toy_bundle().model.scores(toy_standardized.standardized)
        series = client.get(f"/sessions/{session['session_id']}/state").json()["series"]
        assert series["risk"] == [float(v) for v in expected]
        assert snapshots[-1]["turn_risk"] == float(expected[-1])

    def test_log_exports_events_verbatim(self, client, replayed, toy_records):
        session, _ = replayed
        doc = client.get(f"/sessions/{session['session_id']}/log").json()
        assert doc["schema_version"] == 1
        assert doc["session_id"] == session["session_id"]
        assert len(doc["events"]) == 10
        for event, record in zip(doc["events"], toy_records):
            assert event.pop("match_id") == f"live-{session['session_id']}"
            expected = record_to_dict(record)
            expected.pop("match_id")
            assert event == expected


class TestMutation:
    def test_empty_session_state(self, client):
        session = new_session(client)
        doc = client.get(f"/sessions/{session['session_id']}/state").json()
        assert doc["session"]["n_points"] == 0
        assert all(v == [] for v in doc["series"].values())

    def test_out_of_order_post_409(self, client, toy_events):
        session = new_session(client)
        resp = client.post(f"/sessions/{session['session_id']}/points", json=toy_events[1])
        assert resp.status_code == 409
        assert "expected point_index 1" in resp.json()["detail"]

    def test_semantically_impossible_event_422(self, client, toy_events):
        session = new_session(client)
        bad = {**toy_events[0], "server": "A", "point_winner": "B", "ace": "B"}
        resp = client.post(f"/sessions/{session['session_id']}/points", json=bad)
        assert resp.status_code == 422
        assert "ace" in resp.json()["detail"]

    def test_malformed_body_422(self, client, toy_events):
        session = new_session(client)
        resp = client.post(
            f"/sessions/{session['session_id']}/points",
            json={**toy_events[0], "server": "C"},
        )
        assert resp.status_code == 422

    def test_rejected_event_leaves_log_intact(self, client, toy_events):
        session = new_session(client)
        sid = session["session_id"]
        assert client.post(f"/sessions/{sid}/points", json=toy_events[0]).status_code == 200
        bad = {**toy_events[1], "ace": "B", "server": "A", "point_winner": "B"}
        assert client.post(f"/sessions/{sid}/points", json=bad).status_code == 422
        assert client.get(f"/sessions/{sid}/state").json()["session"]["n_points"] == 1
        assert client.post(f"/sessions/{sid}/points", json=toy_events[1]).status_code == 200

    def test_undo_rolls_back_one_unit(self, client, toy_events):
        session = new_session(client)
        sid = session["session_id"]
        for event in toy_events[:2]:
            client.post(f"/sessions/{sid}/points", json=event)
        snap = client.delete(f"/sessions/{sid}/points/last").json()
        assert snap["unit"] == 1
        assert snap["p_a"] == TOY_P_A[0]
        assert snap["turned"] is False
        snap = client.delete(f"/sessions/{sid}/points/last").json()
        assert snap == {
            "schema_version": 1,
            "unit": 0,
            "p_a": None,
            "p_b": None,
            "delta": None,
            "turn_risk": None,
            "turned": False,
        }

    def test_undo_empty_409(self, client):
        session = new_session(client)
        resp = client.delete(f"/sessions/{session['session_id']}/points/last")
        assert resp.status_code == 409
        assert "no points" in resp.json()["detail"]

    def test_undo_then_repost_restores_state(self, client, toy_events):
        session = new_session(client)
        sid = session["session_id"]
        for event in toy_events[:3]:
            client.post(f"/sessions/{sid}/points", json=event)
        before = client.get(f"/sessions/{sid}/state").json()
        client.delete(f"/sessions/{sid}/points/last")
        client.post(f"/sessions/{sid}/points", json=toy_events[2])
        assert client.get(f"/sessions/{sid}/state").json() == before

    def test_edited_history_equals_linear_replay(self, client, toy_events):
        edited = [dict(e) for e in toy_events[:5]]
        edited[3]["distance_run_a"] += 4.5
        edited[4]["point_winner"] = "B"
        edited[4]["winner_shot"] = None
        edited[4]["break_point_won"] = None

        scenic = new_session(client)
        for event in toy_events[:5]:
            client.post(f"/sessions/{scenic['session_id']}/points", json=event)
        client.delete(f"/sessions/{scenic['session_id']}/points/last")
        client.delete(f"/sessions/{scenic['session_id']}/points/last")
        for event in edited[3:]:
            client.post(f"/sessions/{scenic['session_id']}/points", json=event)

        direct = new_session(client)
        for event in edited:
            client.post(f"/sessions/{direct['session_id']}/points", json=event)

        scenic_state = client.get(f"/sessions/{scenic['session_id']}/state").json()
        direct_state = client.get(f"/sessions/{direct['session_id']}/state").json()
        assert scenic_state["series"] == direct_state["series"]

    def test_sessions_are_isolated(self, client, toy_events):
        one = new_session(client)
        two = new_session(client)
        client.post(f"/sessions/{one['session_id']}/points", json=toy_events[0])
        doc = client.get(f"/sessions/{two['session_id']}/state").json()
        assert doc["session"]["n_points"] == 0


class TestAppWiring:
    def test_console_mount_and_redirect(self, tmp_path):
        (tmp_path / "index.html").write_text("<h1>console stub</h1>", encoding="utf-8")
        with TestClient(create_app(console_dir=tmp_path)) as c:
            resp = c.get("/", follow_redirects=False)
            assert resp.status_code == 307
            assert resp.headers["location"] == "/console/"
            assert "console stub" in c.get("/console/").text

    def test_console_env_var(self, tmp_path, monkeypatch):
        (tmp_path / "index.html").write_text("env console", encoding="utf-8")
        monkeypatch.setenv("TURNPOINT_CONSOLE", str(tmp_path))
        with TestClient(create_app()) as c:
            assert c.get("/", follow_redirects=False).status_code == 307

    def test_missing_console_dir_is_ignored(self, tmp_path):
        with TestClient(create_app(console_dir=tmp_path / "absent")) as c:
            assert c.get("/").json()["service"] == "turnpoint"

    def test_model_dir_bundles_are_served(self, client, tmp_path, toy_events):
        bundle = toy_bundle()
        doc = {
            "model_id": "alt-forest",
            "description": "copy of the demo forest",
            "model": bundle.model_doc,
            "column_stats": bundle.column_stats.to_dict(),
        }
        (tmp_path / "alt.json").write_text(json.dumps(doc), encoding="utf-8")
        with TestClient(create_app(model_dir=tmp_path)) as c:
            ids = {m["model_id"] for m in c.get("/models").json()["models"]}
            assert ids == {"toy-forest", "alt-forest"}
            session = new_session(c, model_id="alt-forest")
            resp = c.post(f"/sessions/{session['session_id']}/points", json=toy_events[0])
            assert resp.status_code == 200
            assert resp.json()["p_a"] == TOY_P_A[0]
