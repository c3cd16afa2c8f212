"""Service configuration: JSON file + environment overrides.

Overrides use the ``REASONDET_`` prefix with ``__`` as the path
separator (``REASONDET_LISTEN__PORT=9000`` sets ``listen.port``); values
are parsed as JSON when possible, else taken as strings.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .backends import DEFAULT_BOX_THRESHOLD, EndpointConfig
from .backends.http import HttpDetector, HttpReasoner, HttpTextLLM
from .backends.mocks import ReplayDetector, ReplayReasoner, ReplayTextLLM
from .backends.wire import FixtureStore
from .pipeline import PipelineConfig

ENV_PREFIX = "REASONDET_"


class ConfigError(ValueError):
    """Unusable service configuration."""


@dataclass(frozen=True)
class ListenConfig:
    host: str = "127.0.0.1"
    port: int = 8008


@dataclass(frozen=True)
class ServiceConfig:
    listen: ListenConfig = field(default_factory=ListenConfig)
    replay: bool = False
    fixtures_dir: str | None = None
    template_dir: str | None = None
    max_upload_bytes: int = 8_000_000
    request_log: str | None = None
    datagen_dir: str = "datagen-runs"
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    reasoner: EndpointConfig | None = None
    detector: EndpointConfig | None = None
    detector_box_threshold: float = DEFAULT_BOX_THRESHOLD
    text_llm: EndpointConfig | None = None

    def __post_init__(self) -> None:
        if self.replay and not self.fixtures_dir:
            raise ConfigError("replay mode requires fixtures_dir (all backends must be mocks)")
        if self.max_upload_bytes < 1:
            raise ConfigError("max_upload_bytes must be >= 1")


def _apply_env_overrides(doc: dict, env: Mapping[str, str]) -> dict:
    for key, raw in env.items():
        if not key.startswith(ENV_PREFIX):
            continue
        path = [p.lower() for p in key[len(ENV_PREFIX) :].split("__") if p]
        if not path:
            continue
        try:
            value: Any = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key} walks through a non-object")
        node[path[-1]] = value
    return doc


def _endpoint(doc: dict | None) -> EndpointConfig | None:
    if not doc:
        return None
    known = {f for f in EndpointConfig.__dataclass_fields__}
    return EndpointConfig(**{k: v for k, v in doc.items() if k in known})


def config_from_dict(doc: dict) -> ServiceConfig:
    backends = doc.get("backends", {})
    detector_doc = dict(backends.get("detector") or {})
    detector_threshold = detector_doc.pop("box_threshold", DEFAULT_BOX_THRESHOLD)
    return ServiceConfig(
        listen=ListenConfig(**doc.get("listen", {})),
        replay=bool(doc.get("replay", False)),
        fixtures_dir=doc.get("fixtures_dir"),
        template_dir=doc.get("template_dir"),
        max_upload_bytes=int(doc.get("max_upload_bytes", 8_000_000)),
        request_log=doc.get("request_log"),
        datagen_dir=doc.get("datagen_dir", "datagen-runs"),
        pipeline=PipelineConfig(**doc.get("pipeline", {})),
        reasoner=_endpoint(backends.get("reasoner")),
        detector=_endpoint(detector_doc),
        detector_box_threshold=detector_threshold,
        text_llm=_endpoint(backends.get("text_llm")),
    )


def load_config(path: str | Path, env: Mapping[str, str] | None = None) -> ServiceConfig:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    doc = _apply_env_overrides(doc, env if env is not None else os.environ)
    return config_from_dict(doc)


def build_backends(config: ServiceConfig):
    """Construct (reasoner, detector, text_llm) per the config.

    Replay mode wires every backend to the fixture store and never
    opens a network connection; live mode requires endpoint configs.
    """
    if config.replay:
        assert config.fixtures_dir is not None
        store = FixtureStore(config.fixtures_dir)
        return (
            ReplayReasoner(store),
            ReplayDetector(store, box_threshold=config.detector_box_threshold),
            ReplayTextLLM(store),
        )
    missing = [
        name
        for name, cfg in (("reasoner", config.reasoner), ("detector", config.detector))
        if cfg is None
    ]
    if missing:
        raise ConfigError(f"live mode requires backend configs for: {', '.join(missing)}")
    reasoner = HttpReasoner(config.reasoner)
    detector = HttpDetector(config.detector, box_threshold=config.detector_box_threshold)
    text_llm = HttpTextLLM(config.text_llm) if config.text_llm else None
    return reasoner, detector, text_llm
