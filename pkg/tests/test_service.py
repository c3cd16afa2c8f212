"""HTTP service: endpoints, error mapping, schema validity, determinism."""

from __future__ import annotations

import json
import time
from importlib import resources
from pathlib import Path

import jsonschema
import pytest
from fastapi.testclient import TestClient

from reasondet.backends.errors import BackendTimeoutError, UpstreamError
from reasondet.backends.mocks import CannedDetector, CannedReasoner, ReplayTextLLM
from reasondet.backends.wire import FixtureStore
from reasondet.config import ServiceConfig, config_from_dict, load_config
from reasondet.service import create_app
from tests.conftest import (
    BEVERAGE_QUERY,
    CAPTIONS_FILE,
    INSTANCES_FILE,
    make_png,
    seed_beverage_scenario,
    seed_datagen_fixtures,
)


def load_schema(name: str) -> dict:
    text = resources.files("reasondet").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


PIPELINE_RESULT_SCHEMA = load_schema("pipeline_result")
ERROR_SCHEMA = load_schema("error")
RUN_SCHEMA = load_schema("datagen_run")
RUN_CREATED_SCHEMA = load_schema("run_created")


def assert_error_body(response, status: int, stage: str | None = None):
    assert response.status_code == status
    jsonschema.validate(response.json(), ERROR_SCHEMA)
    if stage is not None:
        assert response.json()["stage"] == stage


@pytest.fixture
def replay_app(tmp_path):
    store = FixtureStore(tmp_path / "fixtures")
    seed_beverage_scenario(store)
    seed_datagen_fixtures(store)
    config = ServiceConfig(
        replay=True,
        fixtures_dir=str(store.root),
        datagen_dir=str(tmp_path / "runs"),
        max_upload_bytes=2_000_000,
    )
    return create_app(config)


@pytest.fixture
def client(replay_app):
    return TestClient(replay_app)


def kitchen_upload():
    return {"image": ("kitchen.png", make_png(640, 480), "image/png")}


class TestDetectEndpoint:
    def test_beverage_scenario(self, client):
        response = client.post("/v1/detect", data={"query": BEVERAGE_QUERY}, files=kitchen_upload())
        assert response.status_code == 200
        doc = response.json()
        jsonschema.validate(doc, PIPELINE_RESULT_SCHEMA)
        assert "refrigerator" in doc["answer"]["phrases"]
        assert [d["phrase"] for d in doc["detections"]] == ["refrigerator"]
        assert doc["image"]["width_px"] == 640
        box_px = doc["detections"][0]["box_px"]
        assert box_px is not None and box_px["w"] == pytest.approx(0.28 * 640)

    def test_empty_query_400(self, client):
        response = client.post("/v1/detect", data={"query": "  "}, files=kitchen_upload())
        assert_error_body(response, 400, stage="validate")

    def test_missing_image_400(self, client):
        response = client.post("/v1/detect", data={"query": "find it"})
        assert_error_body(response, 400, stage="validate")

    def test_bad_threshold_400(self, client):
        response = client.post(
            "/v1/detect", data={"query": "q", "threshold": "1.5"}, files=kitchen_upload()
        )
        assert_error_body(response, 400, stage="validate")

    def test_oversize_upload_413(self, tmp_path):
        store = FixtureStore(tmp_path / "fixtures")
        seed_beverage_scenario(store)
        config = ServiceConfig(replay=True, fixtures_dir=str(store.root), max_upload_bytes=64)
        client = TestClient(create_app(config))
        response = client.post("/v1/detect", data={"query": "q"}, files=kitchen_upload())
        assert_error_body(response, 413)

    def test_image_url_variant(self, tmp_path):
        store = FixtureStore(tmp_path / "fixtures")
        seed_beverage_scenario(store, image_id="kitchen.png")
        config = ServiceConfig(replay=True, fixtures_dir=str(store.root))
        client = TestClient(create_app(config))
        response = client.post(
            "/v1/detect",
            data={"query": BEVERAGE_QUERY, "image_url": "http://images.test/photos/kitchen.png"},
        )
        assert response.status_code == 200
        assert response.json()["detections"]

    def test_request_id_echoed(self, client):
        response = client.post(
            "/v1/detect",
            data={"query": BEVERAGE_QUERY},
            files=kitchen_upload(),
            headers={"X-Request-Id": "req-42"},
        )
        assert response.headers["X-Request-Id"] == "req-42"

    def test_replay_determinism(self, client):
        docs = []
        for _ in range(2):
            response = client.post("/v1/detect", data={"query": BEVERAGE_QUERY}, files=kitchen_upload())
            doc = response.json()
            doc.pop("timings_ms")
            docs.append(doc)
        assert docs[0] == docs[1]

    def test_detector_down_502(self):
        class DownDetector:
            box_threshold = 0.35

            def detect(self, image, phrases, threshold):
                raise UpstreamError("detector exploded", status=500, stage="detect")

        reasoner = CannedReasoner({BEVERAGE_QUERY: "Fridge. Therefore the answer is: [refrigerator]"})
        config = ServiceConfig()
        client = TestClient(create_app(config, backends=(reasoner, DownDetector(), None)))
        response = client.post("/v1/detect", data={"query": BEVERAGE_QUERY}, files=kitchen_upload())
        assert_error_body(response, 502, stage="detect")

    def test_reasoner_timeout_504(self):
        class SlowReasoner:
            def reason(self, image, messages):
                raise BackendTimeoutError("too slow")

        config = ServiceConfig()
        client = TestClient(create_app(config, backends=(SlowReasoner(), CannedDetector({}), None)))
        response = client.post("/v1/detect", data={"query": "q"}, files=kitchen_upload())
        assert_error_body(response, 504, stage="reason")

    def test_no_marker_result_is_200_with_failure(self):
        reasoner = CannedReasoner({"weird": "no structured output here"})
        config = ServiceConfig()
        client = TestClient(create_app(config, backends=(reasoner, CannedDetector({}), None)))
        response = client.post("/v1/detect", data={"query": "weird"}, files=kitchen_upload())
        assert response.status_code == 200
        doc = response.json()
        jsonschema.validate(doc, PIPELINE_RESULT_SCHEMA)
        assert doc["failure"]["kind"] == "ReasonerNoMarker"


def wait_for_terminal(client, run_id: str, timeout_s: float = 10.0) -> dict:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        doc = client.get(f"/v1/datagen/runs/{run_id}").json()
        if doc["state"] in ("done", "failed"):
            return doc
        time.sleep(0.02)
    raise AssertionError(f"run {run_id} did not finish: {doc}")


class TestDatagenEndpoints:
    def _start(self, client, run_id="demo-two"):
        body = {
            "run_id": run_id,
            "captions_file": str(CAPTIONS_FILE),
            "instances_file": str(INSTANCES_FILE),
        }
        return client.post("/v1/datagen/runs", json=body)

    def test_two_image_replay_run(self, client):
        created = self._start(client)
        assert created.status_code == 202
        jsonschema.validate(created.json(), RUN_CREATED_SCHEMA)
        doc = wait_for_terminal(client, "demo-two")
        jsonschema.validate(doc, RUN_SCHEMA)
        assert doc["state"] == "done"
        assert doc["counters"]["ok"] == 2
        assert doc["pairs"] == 10

        dataset = client.get("/v1/datagen/runs/demo-two/dataset")
        assert dataset.status_code == 200
        lines = [l for l in dataset.text.splitlines() if l.strip()]
        assert len(lines) == 11  # header + 10 pairs

    def test_unknown_run_404(self, client):
        assert_error_body(client.get("/v1/datagen/runs/nope"), 404)
        assert_error_body(client.get("/v1/datagen/runs/nope/dataset"), 404)

    def test_duplicate_run_id_409(self, client):
        assert self._start(client, run_id="dup").status_code == 202
        wait_for_terminal(client, "dup")
        assert_error_body(self._start(client, run_id="dup"), 409)

    def test_unreadable_files_400(self, client):
        body = {"captions_file": "/missing.json", "instances_file": "/missing2.json"}
        assert_error_body(client.post("/v1/datagen/runs", json=body), 400)

    def test_status_schema_while_pending(self, client):
        created = self._start(client, run_id="pending-check")
        assert created.status_code == 202
        doc = client.get("/v1/datagen/runs/pending-check").json()
        jsonschema.validate(doc, RUN_SCHEMA)
        wait_for_terminal(client, "pending-check")


class TestConfig:
    def test_replay_mode_forbids_live_backends(self, tmp_path):
        from reasondet.backends.http import HttpReasoner
        from reasondet.backends import EndpointConfig

        live = HttpReasoner(EndpointConfig(base_url="http://x.test"))
        store = FixtureStore(tmp_path)
        config = ServiceConfig(replay=True, fixtures_dir=str(store.root))
        with pytest.raises(ValueError):
            create_app(config, backends=(live, CannedDetector({}), None))

    def test_replay_requires_fixtures_dir(self):
        with pytest.raises(Exception):
            ServiceConfig(replay=True)

    def test_load_config_with_env_override(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"listen": {"port": 1111}, "replay": True, "fixtures_dir": "f"}))
        config = load_config(path, env={"REASONDET_LISTEN__PORT": "2222"})
        assert config.listen.port == 2222
        assert config.replay is True

    def test_config_from_dict_builds_endpoints(self):
        config = config_from_dict(
            {
                "backends": {
                    "reasoner": {"base_url": "http://r.test", "timeout_ms": 5000},
                    "detector": {"base_url": "http://d.test", "box_threshold": 0.4},
                }
            }
        )
        assert config.reasoner.base_url == "http://r.test"
        assert config.detector_box_threshold == 0.4

    def test_healthz(self, client):
        doc = client.get("/healthz").json()
        assert doc["status"] == "ok" and doc["replay"] is True

    def test_request_log_written(self, tmp_path):
        store = FixtureStore(tmp_path / "fixtures")
        seed_beverage_scenario(store)
        log_path = tmp_path / "requests.jsonl"
        config = ServiceConfig(replay=True, fixtures_dir=str(store.root), request_log=str(log_path))
        client = TestClient(create_app(config))
        client.get("/healthz")
        entries = [json.loads(l) for l in log_path.read_text().splitlines()]
        assert entries and entries[0]["path"] == "/healthz"
