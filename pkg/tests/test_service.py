"""HTTP facade: session lifecycle, validation, event logs and replay."""
from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from attrloop.service import ServiceSettings, create_app, replay

from conftest import linear_cfg_text

LOGISTIC_CFG = """\
[experiment]
name = svc-classes
seed = 3
strategies = caipi, interactive_single_occlusion
iterations = 5

[dataset]
kind = logistic
m = 3
n_train = 40
n_test = 30

[model]
kind = logistic_regression
"""


@pytest.fixture()
def linear_app(write_config, tmp_path):
    cfg = write_config(linear_cfg_text(strategies="baseline, interactive_occlusion, interactive_shap", m=3, n_train=30, n_test=30))
    settings = ServiceSettings(default_config=cfg, log_dir=tmp_path / "logs")
    return TestClient(create_app(settings)), cfg, tmp_path / "logs"


@pytest.fixture()
def classes_app(write_config, tmp_path):
    cfg = write_config(LOGISTIC_CFG, name="classes.cfg")
    settings = ServiceSettings(default_config=cfg, log_dir=tmp_path / "logs")
    return TestClient(create_app(settings)), cfg


def _create(client, strategy="interactive_occlusion", **extra):
    response = client.post("/sessions", json={"strategy": strategy, **extra})
    assert response.status_code == 201, response.text
    return response.json()


def test_health(linear_app):
    client, _, _ = linear_app
    assert client.get("/health").json() == {"status": "ok"}


class TestCreateSession:
    def test_response_shape(self, linear_app):
        client, _, _ = linear_app
        body = _create(client)
        assert body["strategy"] == "interactive_occlusion"
        assert body["task"] == "regression"
        assert body["m"] == 3
        assert body["feature_names"] == ["x0", "x1", "x2"]
        assert len(body["background"]) == 3
        assert body["iteration"] == 0
        assert isinstance(body["metric"], float)

    def test_sessions_are_distinct(self, linear_app):
        client, _, _ = linear_app
        a, b = _create(client), _create(client)
        assert a["session_id"] != b["session_id"]

    def test_starts_with_one_metric_point(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client)["session_id"]
        history = client.get(f"/sessions/{sid}/metrics").json()
        assert len(history["metric"]) == 1
        assert history["iteration"] == 0
        assert history["complete"] is False

    def test_unknown_strategy_rejected(self, linear_app):
        client, _, _ = linear_app
        assert client.post("/sessions", json={"strategy": "warp"}).status_code == 400

    def test_unlisted_strategy_rejected(self, linear_app):
        client, _, _ = linear_app
        assert client.post("/sessions", json={"strategy": "caipi"}).status_code == 400

    def test_bad_config_path_rejected(self, linear_app):
        client, _, _ = linear_app
        response = client.post("/sessions", json={"strategy": "baseline", "config_path": "/nope.cfg"})
        assert response.status_code == 400

    def test_server_without_default_needs_a_path(self, write_config):
        cfg = write_config(linear_cfg_text())
        client = TestClient(create_app(ServiceSettings()))
        assert client.post("/sessions", json={"strategy": "baseline"}).status_code == 400
        ok = client.post("/sessions", json={"strategy": "baseline", "config_path": str(cfg)})
        assert ok.status_code == 201

    def test_seed_override(self, linear_app):
        client, _, _ = linear_app
        a = _create(client, seed=1)
        b = _create(client, seed=1)
        c = _create(client, seed=2)
        qa = client.get(f"/sessions/{a['session_id']}/query").json()
        qb = client.get(f"/sessions/{b['session_id']}/query").json()
        qc = client.get(f"/sessions/{c['session_id']}/query").json()
        assert qa["pending"] == qb["pending"]
        assert qa["pending"] != qc["pending"]


class TestQuery:
    def test_first_query_is_ready_at_creation(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client)["session_id"]
        body = client.get(f"/sessions/{sid}/query").json()
        assert body["iteration"] == 0
        assert body["complete"] is False
        assert len(body["pending"]) == 1
        sample = body["pending"][0]
        assert sample["sample_id"] == 0
        assert len(sample["features"]) == 3
        assert isinstance(sample["recorded_label"], float)
        assert isinstance(sample["prediction"], float)
        assert len(sample["attribution"]["values"]) == 3
        assert sample["attribution"]["available"] == [True, True, True]

    def test_untrained_model_shows_zero_attribution(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client)["session_id"]
        sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
        assert sample["attribution"]["values"] == [0.0, 0.0, 0.0]
        assert sample["prediction"] == 0.0

    def test_displayed_attribution_is_stable(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client, strategy="interactive_shap")["session_id"]
        first = client.get(f"/sessions/{sid}/query").json()
        second = client.get(f"/sessions/{sid}/query").json()
        assert first == second

    def test_unknown_session(self, linear_app):
        client, _, _ = linear_app
        assert client.get("/sessions/nope/query").status_code == 404


class TestCorrections:
    def _one_round(self, client, sid, payload_extra=None):
        sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
        payload = {"sample_id": sample["sample_id"], "label": sample["recorded_label"]}
        payload.update(payload_extra or {})
        return client.post(f"/sessions/{sid}/corrections", json=payload)

    def test_correction_then_retrain(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client)["session_id"]
        response = self._one_round(client, sid, {"attributions": {"0": 0.5, "1": -0.25, "2": 0.0}})
        assert response.status_code == 200
        body = response.json()
        assert body["batch_size"] == 6  # twice the feature count
        assert body["remaining"] == 0
        retrained = client.post(f"/sessions/{sid}/retrain").json()
        assert retrained["iteration"] == 1
        assert retrained["cumulative_samples"] == 7  # original + batch
        assert retrained["complete"] is False
        # The next query is drawn automatically.
        next_query = client.get(f"/sessions/{sid}/query").json()
        assert next_query["iteration"] == 1
        assert next_query["pending"][0]["sample_id"] == 1

    def test_label_defaults_to_the_recorded_one(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client, strategy="baseline")["session_id"]
        sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
        response = client.post(f"/sessions/{sid}/corrections", json={"sample_id": sample["sample_id"]})
        assert response.status_code == 200
        assert response.json()["batch_size"] == 6

    def test_skip_contributes_nothing(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client)["session_id"]
        sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
        response = client.post(f"/sessions/{sid}/corrections", json={"sample_id": sample["sample_id"], "skip": True})
        assert response.json()["batch_size"] == 0
        retrained = client.post(f"/sessions/{sid}/retrain").json()
        assert retrained["cumulative_samples"] == 0

    def test_duplicate_correction_conflicts(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client, strategy="baseline")["session_id"]
        sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
        payload = {"sample_id": sample["sample_id"], "label": sample["recorded_label"]}
        assert client.post(f"/sessions/{sid}/corrections", json=payload).status_code == 200
        assert client.post(f"/sessions/{sid}/corrections", json=payload).status_code == 409
        # Answered samples leave the pending list.
        assert client.get(f"/sessions/{sid}/query").json()["pending"] == []

    def test_unknown_sample(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client)["session_id"]
        response = client.post(f"/sessions/{sid}/corrections", json={"sample_id": 99, "label": 0.0})
        assert response.status_code == 404

    def test_sample_id_required(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client)["session_id"]
        assert client.post(f"/sessions/{sid}/corrections", json={"label": 1.0}).status_code == 400

    def test_baseline_rejects_extra_feedback(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client, strategy="baseline")["session_id"]
        response = self._one_round(client, sid, {"attributions": {"0": 1.0}})
        assert response.status_code == 400

    def test_full_scores_strategy_rejects_partial_maps(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client, strategy="interactive_shap")["session_id"]
        response = self._one_round(client, sid, {"attributions": {"0": 1.0}})
        assert response.status_code == 400
        assert "every feature" in response.json()["detail"]

    def test_full_scores_strategy_accepts_full_maps(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client, strategy="interactive_shap")["session_id"]
        response = self._one_round(client, sid, {"attributions": {"0": 1.0, "1": 2.0, "2": 3.0}})
        assert response.status_code == 200
        assert response.json()["batch_size"] == 6  # k defaults to the feature count

    def test_label_only_correction_still_counts(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client, strategy="interactive_shap")["session_id"]
        assert self._one_round(client, sid).json()["batch_size"] == 6

    def test_malformed_attribution_entries(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client)["session_id"]
        response = self._one_round(client, sid, {"attributions": {"zero": 1.0}})
        assert response.status_code == 400
        response = self._one_round(client, sid, {"attributions": "all"})
        assert response.status_code == 400

    def test_classification_rules(self, classes_app):
        client, _ = classes_app
        sid = _create(client, strategy="interactive_single_occlusion")["session_id"]
        sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
        bad_label = client.post(f"/sessions/{sid}/corrections", json={"sample_id": sample["sample_id"], "label": 0.5})
        assert bad_label.status_code == 400
        bad_score = client.post(
            f"/sessions/{sid}/corrections",
            json={"sample_id": sample["sample_id"], "label": 1.0, "attributions": {"0": 0.5}},
        )
        assert bad_score.status_code == 400
        good = client.post(
            f"/sessions/{sid}/corrections",
            json={"sample_id": sample["sample_id"], "label": 1.0, "attributions": {"0": 1.0}},
        )
        assert good.status_code == 200

    def test_irrelevance_strategy_takes_a_set(self, classes_app):
        client, _ = classes_app
        sid = _create(client, strategy="caipi")["session_id"]
        sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
        response = client.post(
            f"/sessions/{sid}/corrections",
            json={"sample_id": sample["sample_id"], "label": sample["recorded_label"], "irrelevant": [0, 2]},
        )
        assert response.status_code == 200
        assert response.json()["batch_size"] == 6


class TestRetrain:
    def test_retrain_with_open_samples_conflicts(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client)["session_id"]
        assert client.post(f"/sessions/{sid}/retrain").status_code == 409

    def test_unknown_session(self, linear_app):
        client, _, _ = linear_app
        assert client.post("/sessions/nope/retrain").status_code == 404
        assert client.get("/sessions/nope/metrics").status_code == 404

    def test_metrics_accumulate(self, linear_app):
        client, _, _ = linear_app
        sid = _create(client, strategy="baseline")["session_id"]
        for _ in range(3):
            sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
            client.post(f"/sessions/{sid}/corrections", json={"sample_id": sample["sample_id"]})
            client.post(f"/sessions/{sid}/retrain")
        history = client.get(f"/sessions/{sid}/metrics").json()
        assert history["iteration"] == 3
        assert len(history["metric"]) == 4
        assert history["cumulative_samples"] == [0, 7, 14, 21]

    def test_sessions_are_isolated(self, linear_app):
        client, _, _ = linear_app
        a = _create(client, strategy="baseline")["session_id"]
        b = _create(client, strategy="baseline")["session_id"]
        sample = client.get(f"/sessions/{a}/query").json()["pending"][0]
        client.post(f"/sessions/{a}/corrections", json={"sample_id": sample["sample_id"]})
        client.post(f"/sessions/{a}/retrain")
        assert client.get(f"/sessions/{b}/metrics").json()["iteration"] == 0
        assert len(client.get(f"/sessions/{b}/query").json()["pending"]) == 1


class TestEventLog:
    def _drive(self, client, strategy="interactive_occlusion", rounds=2):
        sid = _create(client, strategy=strategy)["session_id"]
        for _ in range(rounds):
            sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
            client.post(
                f"/sessions/{sid}/corrections",
                json={"sample_id": sample["sample_id"], "label": 2.5, "attributions": {"1": 0.75}},
            )
            client.post(f"/sessions/{sid}/retrain")
        return sid

    def test_log_is_append_only_json_lines(self, linear_app):
        client, _, log_dir = linear_app
        sid = self._drive(client)
        lines = (log_dir / f"{sid}.jsonl").read_text().splitlines()
        events = [json.loads(line) for line in lines]
        assert [e["event"] for e in events] == ["created", "corrected", "retrained", "corrected", "retrained"]
        assert events[0]["session_id"] == sid
        assert events[1]["request"]["attributions"] == {"1": 0.75}

    def test_replay_rebuilds_the_metric_history(self, linear_app):
        client, _, log_dir = linear_app
        sid = self._drive(client, rounds=3)
        want = client.get(f"/sessions/{sid}/metrics").json()
        got = replay(log_dir / f"{sid}.jsonl")
        assert got["metric"] == want["metric"]
        assert got["cumulative_samples"] == want["cumulative_samples"]

    def test_replay_handles_skips_and_defaults(self, linear_app):
        client, _, log_dir = linear_app
        sid = _create(client, strategy="baseline")["session_id"]
        sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
        client.post(f"/sessions/{sid}/corrections", json={"sample_id": sample["sample_id"], "skip": True})
        client.post(f"/sessions/{sid}/retrain")
        sample = client.get(f"/sessions/{sid}/query").json()["pending"][0]
        client.post(f"/sessions/{sid}/corrections", json={"sample_id": sample["sample_id"]})
        client.post(f"/sessions/{sid}/retrain")
        want = client.get(f"/sessions/{sid}/metrics").json()
        got = replay(log_dir / f"{sid}.jsonl")
        assert got["metric"] == want["metric"]
        assert got["cumulative_samples"] == want["cumulative_samples"]

    def test_fresh_session_replays_to_one_point(self, linear_app):
        client, _, log_dir = linear_app
        sid = _create(client, strategy="baseline")["session_id"]
        got = replay(log_dir / f"{sid}.jsonl")
        assert len(got["metric"]) == 1
