"""Backend abstractions: a multimodal reasoner, an open-vocabulary
detector and a text-only LLM, each available as a live HTTP client or a
deterministic replay mock.

The three call shapes share preconditions and response-contract
enforcement, defined here so every implementation behaves identically.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

from ..domain import BoundingBox, DetectionRecord, ImageRef, ObjectPhrase
from ..prompts import ChatMessage, ImagePart
from .errors import (
    BackendError,
    BackendTimeoutError,
    CacheMissError,
    PhraseMismatchWarning,
    PreconditionError,
    ProtocolError,
    UpstreamError,
)

log = logging.getLogger(__name__)

DEFAULT_BOX_THRESHOLD = 0.35


@dataclass(frozen=True)
class EndpointConfig:
    """Connection settings shared by all HTTP backends."""

    base_url: str
    auth_token_env: str | None = None
    timeout_ms: int = 30_000
    retries: int = 2
    backoff_base_ms: int = 250
    rate_per_sec: float = 10.0
    max_concurrency: int = 4

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass(frozen=True)
class ReasonerCapabilities:
    """What the reasoner endpoint accepts."""

    max_messages: int = 32
    image_modes: tuple[str, ...] = ("url", "b64")


@runtime_checkable
class ReasonerBackend(Protocol):
    def reason(self, image: ImageRef, messages: Sequence[ChatMessage]) -> str: ...


@runtime_checkable
class DetectorBackend(Protocol):
    box_threshold: float

    def detect(
        self, image: ImageRef, phrases: Sequence[ObjectPhrase], threshold: float
    ) -> list[DetectionRecord]: ...


@runtime_checkable
class TextLLMBackend(Protocol):
    def complete_text(self, messages: Sequence[ChatMessage]) -> str: ...


def check_reason_request(image: ImageRef, messages: Sequence[ChatMessage]) -> None:
    """Validate a reasoner request before any transport work happens."""
    if not messages:
        raise PreconditionError("messages must be non-empty")
    if messages[0].role != "system":
        raise PreconditionError("messages must start with a system message")
    image_parts = [p for m in messages for p in m.parts if isinstance(p, ImagePart)]
    if len(image_parts) != 1:
        raise PreconditionError(f"exactly one image part required, got {len(image_parts)}")
    if image_parts[0].image.id != image.id:
        raise PreconditionError("the image part must reference the request image")


def check_detect_request(phrases: Sequence[ObjectPhrase], threshold: float) -> None:
    if not phrases:
        raise PreconditionError("phrases must be non-empty")
    if not (0.0 < threshold < 1.0):
        raise PreconditionError(f"threshold must be in (0,1), got {threshold}")


def check_complete_request(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise PreconditionError("messages must be non-empty")
    if any(isinstance(p, ImagePart) for m in messages for p in m.parts):
        raise PreconditionError("text completion accepts no image parts")


def enforce_detection_contract(
    requested: Sequence[ObjectPhrase],
    raw: Sequence[tuple[str, BoundingBox, float]],
    threshold: float,
) -> list[DetectionRecord]:
    """Apply the response contract to decoded detections.

    Records naming a phrase outside the request set are dropped with a
    :class:`PhraseMismatchWarning`; records under the threshold are
    dropped quietly. Surviving records reuse the requested phrase object
    so downstream identity checks hold.
    """
    by_norm = {p.normalized: p for p in requested}
    out: list[DetectionRecord] = []
    for phrase_text, box, score in raw:
        phrase = by_norm.get(phrase_text.strip().lower())
        if phrase is None:
            warnings.warn(
                f"detector returned unrequested phrase {phrase_text!r}; record dropped",
                PhraseMismatchWarning,
                stacklevel=2,
            )
            continue
        if score < threshold:
            log.debug("dropping %s at %.3f (< %.3f)", phrase.normalized, score, threshold)
            continue
        out.append(DetectionRecord(phrase=phrase, box=box, score=score))
    return out


__all__ = [
    "BackendError",
    "BackendTimeoutError",
    "CacheMissError",
    "DEFAULT_BOX_THRESHOLD",
    "DetectorBackend",
    "EndpointConfig",
    "PhraseMismatchWarning",
    "PreconditionError",
    "ProtocolError",
    "ReasonerBackend",
    "ReasonerCapabilities",
    "TextLLMBackend",
    "UpstreamError",
    "check_complete_request",
    "check_detect_request",
    "check_reason_request",
    "enforce_detection_contract",
]
