"""Deterministic backend stand-ins.

Replay backends answer from a :class:`~reasondet.backends.wire.FixtureStore`
keyed by request digest; identical requests yield byte-identical
responses, and a cold digest is a hard :class:`CacheMissError`. Each
replay backend optionally wraps a live client, turning it into a
recorder: misses go upstream once and the exchange is stored.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from ..domain import DetectionRecord, ImageRef, ObjectPhrase
from ..prompts import ChatMessage, user_turn
from . import (
    DEFAULT_BOX_THRESHOLD,
    DetectorBackend,
    ReasonerBackend,
    TextLLMBackend,
    check_complete_request,
    check_detect_request,
    check_reason_request,
    enforce_detection_contract,
)
from .errors import CacheMissError
from .wire import (
    FixtureStore,
    complete_digest,
    decode_detections,
    detect_digest,
    detection_to_wire,
    encode_detection_request,
    encode_messages,
    reason_digest,
)


class ReplayReasoner:
    def __init__(self, store: FixtureStore, live: ReasonerBackend | None = None):
        self.store = store
        self.live = live
        self.request_log: list[str] = []

    def reason(self, image: ImageRef, messages: Sequence[ChatMessage]) -> str:
        check_reason_request(image, messages)
        digest = reason_digest(image, messages)
        self.request_log.append(digest)
        hit = self.store.get(digest)
        if hit is not None:
            return hit["response"]["text"]
        if self.live is None:
            raise CacheMissError(digest)
        text = self.live.reason(image, messages)
        self.store.put(digest, {"image": image.id, "messages": encode_messages(messages)}, {"text": text})
        return text


class ReplayDetector:
    def __init__(
        self,
        store: FixtureStore,
        live: DetectorBackend | None = None,
        box_threshold: float = DEFAULT_BOX_THRESHOLD,
    ):
        self.store = store
        self.live = live
        self.box_threshold = box_threshold
        #: Phrase lists of every request, for phrase-fidelity assertions.
        self.request_log: list[list[str]] = []

    def detect(
        self, image: ImageRef, phrases: Sequence[ObjectPhrase], threshold: float
    ) -> list[DetectionRecord]:
        check_detect_request(phrases, threshold)
        self.request_log.append([p.normalized for p in phrases])
        digest = detect_digest(image, phrases, threshold)
        hit = self.store.get(digest)
        if hit is not None:
            return enforce_detection_contract(phrases, decode_detections(hit["response"]), threshold)
        if self.live is None:
            raise CacheMissError(digest)
        records = self.live.detect(image, phrases, threshold)
        self.store.put(
            digest,
            encode_detection_request(image, phrases, threshold),
            {"detections": [detection_to_wire(r) for r in records]},
        )
        return records


class ReplayTextLLM:
    def __init__(self, store: FixtureStore, live: TextLLMBackend | None = None):
        self.store = store
        self.live = live
        self.call_count = 0

    def complete_text(self, messages: Sequence[ChatMessage]) -> str:
        check_complete_request(messages)
        digest = complete_digest(messages)
        hit = self.store.get(digest)
        if hit is not None:
            self.call_count += 1
            return hit["response"]["text"]
        if self.live is None:
            raise CacheMissError(digest)
        self.call_count += 1
        text = self.live.complete_text(messages)
        self.store.put(digest, {"messages": encode_messages(messages)}, {"text": text})
        return text


class CannedReasoner:
    """In-memory reasoner keyed on the last user turn's text.

    Handy for unit tests: map each raw query (pre-suffix) or full user
    text to a canned answer string.
    """

    def __init__(self, by_user_text: Mapping[str, str]):
        self.by_user_text = dict(by_user_text)
        self.request_log: list[str] = []

    def reason(self, image: ImageRef, messages: Sequence[ChatMessage]) -> str:
        check_reason_request(image, messages)
        user_text = next(m.text for m in reversed(messages) if m.role == "user")
        self.request_log.append(user_text)
        for key, answer in self.by_user_text.items():
            if user_text == key or user_text == user_turn(key):
                return answer
        raise CacheMissError(reason_digest(image, messages))


class CannedDetector:
    """In-memory detector with records fixed per (image id, phrase)."""

    def __init__(
        self,
        records: Mapping[tuple[str, str], Sequence[DetectionRecord]],
        box_threshold: float = DEFAULT_BOX_THRESHOLD,
    ):
        self.records = dict(records)
        self.box_threshold = box_threshold
        self.request_log: list[list[str]] = []

    def detect(
        self, image: ImageRef, phrases: Sequence[ObjectPhrase], threshold: float
    ) -> list[DetectionRecord]:
        check_detect_request(phrases, threshold)
        self.request_log.append([p.normalized for p in phrases])
        raw = []
        for p in phrases:
            for rec in self.records.get((image.id, p.normalized), ()):
                raw.append((rec.phrase.normalized, rec.box, rec.score))
        return enforce_detection_contract(phrases, raw, threshold)


def seed_reason_fixture(
    store: FixtureStore, image: ImageRef, messages: Sequence[ChatMessage], text: str
) -> str:
    """Record a canned reasoner exchange; returns the digest."""
    digest = reason_digest(image, messages)
    store.put(digest, {"image": image.id, "messages": encode_messages(messages)}, {"text": text})
    return digest


def seed_detect_fixture(
    store: FixtureStore,
    image: ImageRef,
    phrases: Sequence[ObjectPhrase],
    threshold: float,
    detections: Sequence[DetectionRecord],
) -> str:
    digest = detect_digest(image, phrases, threshold)
    store.put(
        digest,
        encode_detection_request(image, phrases, threshold),
        {"detections": [detection_to_wire(r) for r in detections]},
    )
    return digest


def seed_complete_fixture(store: FixtureStore, messages: Sequence[ChatMessage], text: str) -> str:
    digest = complete_digest(messages)
    store.put(digest, {"messages": encode_messages(messages)}, {"text": text})
    return digest
