"""HTTP service exposing detection and dataset generation.

Stateless request handling except for the datagen run registry, whose
per-run state transitions are serialized under one lock. Every response
carries an echoed ``X-Request-Id`` header, and error bodies always have
the shape ``{code, stage, detail}``.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import FileResponse, JSONResponse, Response

from . import prompts
from .backends.errors import BackendError, BackendTimeoutError
from .backends.http import HttpBackendBase
from .config import ServiceConfig, build_backends
from .datagen import DatagenError, GenerationPolicy, GenerationRun
from .datagen.dataset import dataset_stats
from .datagen.generate import generate_dataset, image_status_path
from .datagen.ingest import ingest_annotations
from .domain import ImageRef
from .imagemeta import sniff_dimensions
from .pipeline import run_detection, result_to_json_dict

log = logging.getLogger(__name__)


def _error(status: int, code: str, stage: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "stage": stage, "detail": detail})


class RunRegistry:
    """Datagen runs by id; transitions are serialized per registry."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._runs: dict[str, dict] = {}

    def create(self, run_id: str, total: int) -> bool:
        with self._lock:
            if run_id in self._runs:
                return False
            self._runs[run_id] = {
                "state": "pending",
                "total": total,
                "run": None,
                "error": None,
                "pairs": None,
            }
            return True

    def transition(self, run_id: str, state: str, **fields) -> None:
        with self._lock:
            entry = self._runs[run_id]
            entry["state"] = state
            entry.update(fields)

    def get(self, run_id: str) -> dict | None:
        with self._lock:
            entry = self._runs.get(run_id)
            return dict(entry) if entry else None


def create_app(config: ServiceConfig, backends=None) -> FastAPI:
    """Build the application; backends are injectable for tests."""
    if config.template_dir:
        prompts.set_template_root(config.template_dir)
    if backends is None:
        backends = build_backends(config)
    reasoner, detector, text_llm = backends
    if config.replay:
        for b in (reasoner, detector, text_llm):
            if isinstance(b, HttpBackendBase):
                raise ValueError("replay mode forbids live HTTP backends")

    app = FastAPI(title="reasondet", version="1")
    app.state.config = config
    app.state.registry = RunRegistry()

    request_log_path = Path(config.request_log) if config.request_log else None

    @app.middleware("http")
    async def request_id_middleware(request: Request, call_next):
        request_id = request.headers.get("X-Request-Id") or uuid.uuid4().hex
        response = await call_next(request)
        response.headers["X-Request-Id"] = request_id
        if request_log_path is not None:
            with request_log_path.open("a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {
                            "request_id": request_id,
                            "method": request.method,
                            "path": request.url.path,
                            "status": response.status_code,
                        }
                    )
                    + "\n"
                )
        return response

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "replay": config.replay}

    @app.post("/v1/detect")
    def detect(
        query: str = Form(default=""),
        threshold: Optional[float] = Form(default=None),
        image: Optional[UploadFile] = File(default=None),
        image_url: Optional[str] = Form(default=None),
    ):
        if not query.strip():
            return _error(400, "validation", "validate", "query must be non-empty")
        if image is None and not image_url:
            return _error(400, "validation", "validate", "provide an image file or image_url")
        if threshold is not None and not (0.0 < threshold < 1.0):
            return _error(400, "validation", "validate", f"threshold must be in (0,1), got {threshold}")

        if image is not None:
            data = image.file.read()
            if len(data) > config.max_upload_bytes:
                return _error(413, "too_large", "validate", f"upload exceeds {config.max_upload_bytes} bytes")
            dims = sniff_dimensions(data)
            ref = ImageRef(
                id=image.filename or "upload",
                source=image.filename or "",
                width_px=dims[0] if dims else None,
                height_px=dims[1] if dims else None,
            )
        else:
            name = image_url.rstrip("/").rsplit("/", 1)[-1] or image_url
            ref = ImageRef(id=name, source=image_url)

        pipeline_config = config.pipeline
        if threshold is not None:
            pipeline_config = dataclasses.replace(pipeline_config, box_threshold=threshold)
        try:
            result = run_detection(ref, query.strip(), pipeline_config, reasoner, detector)
        except BackendTimeoutError as e:
            return _error(504, "timeout", e.stage or "backend", str(e))
        except BackendError as e:
            return _error(502, "backend", e.stage or "backend", str(e))
        return JSONResponse(result_to_json_dict(result, include_raw_answer=pipeline_config.include_raw_answer))

    @app.post("/v1/datagen/runs", status_code=202)
    def create_run(body: dict):
        run_id = str(body.get("run_id") or uuid.uuid4().hex[:12])
        captions = body.get("captions_file")
        instances = body.get("instances_file")
        if not captions or not instances:
            return _error(400, "validation", "validate", "captions_file and instances_file are required")
        if not Path(captions).is_file() or not Path(instances).is_file():
            return _error(400, "validation", "validate", "annotation files must be readable")
        if text_llm is None:
            return _error(400, "validation", "validate", "no text LLM backend configured")
        policy_doc = body.get("policy") or {}
        policy = GenerationPolicy(
            run_id=run_id,
            workers=int(policy_doc.get("workers", 1)),
            examples=tuple(policy_doc.get("examples", (1, 2))),
            sampling=policy_doc.get("sampling", {}),
        )
        try:
            records = list(ingest_annotations(captions, instances))
        except DatagenError as e:
            return _error(400, "validation", "ingest", str(e))

        registry: RunRegistry = app.state.registry
        if not registry.create(run_id, total=len(records)):
            return _error(409, "duplicate", "datagen", f"run id {run_id!r} already exists")
        out_dir = Path(config.datagen_dir) / run_id

        def _work() -> None:
            registry.transition(run_id, "running")
            try:
                run = generate_dataset(records, text_llm, out_dir, policy)
                pairs = dataset_stats(run.dataset_path)["pairs"] if run.dataset_path else 0
                registry.transition(run_id, "done", run=run, pairs=pairs)
            except Exception as e:  # pragma: no cover - exercised via failure injection
                log.exception("datagen run %s failed", run_id)
                registry.transition(run_id, "failed", error=str(e))

        threading.Thread(target=_work, name=f"datagen-{run_id}", daemon=True).start()
        return JSONResponse(status_code=202, content={"run_id": run_id, "state": "running"})

    @app.get("/v1/datagen/runs/{run_id}")
    def run_status(run_id: str):
        entry = app.state.registry.get(run_id)
        if entry is None:
            return _error(404, "not_found", "datagen", f"unknown run id {run_id!r}")
        run: GenerationRun | None = entry["run"]
        counters = (
            run.counters
            if run is not None
            else {"total": entry["total"], "pending": entry["total"], "ok": 0,
                  "parse-failed": 0, "validation-failed": 0, "backend-failed": 0}
        )
        return {
            "run_id": run_id,
            "state": entry["state"],
            "counters": counters,
            "pairs": entry["pairs"],
            "dataset_path": run.dataset_path if run else None,
            "error": entry["error"],
        }

    @app.get("/v1/datagen/runs/{run_id}/dataset")
    def run_dataset(run_id: str):
        entry = app.state.registry.get(run_id)
        if entry is None:
            return _error(404, "not_found", "datagen", f"unknown run id {run_id!r}")
        run: GenerationRun | None = entry["run"]
        if entry["state"] != "done" or run is None or not run.dataset_path:
            return _error(404, "not_found", "datagen", f"run {run_id!r} has no dataset yet")
        return FileResponse(run.dataset_path, media_type="application/jsonl")

    return app
