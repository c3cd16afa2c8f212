"""The end-to-end inference procedure.

One run: build the prompt messages, ask the reasoner, parse the target
phrases out of its answer, send them to the detector in a single batched
call, filter by confidence, and classify what (if anything) went wrong.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

from .backends import DetectorBackend, ReasonerBackend
from .backends.errors import BackendError
from .domain import DetectionRecord, ImageRef, ObjectPhrase, ReasonedAnswer
from .parsing import EmptyListError, NoMarkerError, parse_answer
from .prompts import inference_system_prompt, system_message, user_message, user_turn


class FailureKind(str, Enum):
    REASONER_NO_MARKER = "ReasonerNoMarker"
    REASONER_EMPTY_LIST = "ReasonerEmptyList"
    DETECTOR_MISSED_ALL = "DetectorMissedAll"
    DETECTOR_PARTIAL = "DetectorPartial"
    BACKEND_ERROR = "BackendError"


@dataclass(frozen=True)
class FailureClass:
    kind: FailureKind
    detail: str


@dataclass(frozen=True)
class PipelineConfig:
    """Per-run knobs; the service holds one as its defaults."""

    box_threshold: float = 0.35
    ladder_ceiling: str = "T3"
    max_phrases: int = 10
    include_raw_answer: bool = True

    def __post_init__(self) -> None:
        if not (0.0 < self.box_threshold < 1.0):
            raise ValueError(f"box_threshold must be in (0,1), got {self.box_threshold}")
        if self.max_phrases < 1:
            raise ValueError("max_phrases must be >= 1")


@dataclass(frozen=True)
class PipelineResult:
    query: str
    image: ImageRef
    answer: ReasonedAnswer | None
    detections: tuple[DetectionRecord, ...]
    undetected_phrases: tuple[ObjectPhrase, ...]
    failure: FailureClass | None
    timings_ms: Mapping[str, float]
    lint_notes: tuple[str, ...] = field(default_factory=tuple)


def filter_detections(records: Sequence[DetectionRecord], threshold: float) -> list[DetectionRecord]:
    """Keep records scoring at or above the threshold; order-stable, pure."""
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0,1), got {threshold}")
    return [r for r in records if r.score >= threshold]


def classify_failure(
    answer: ReasonedAnswer | None,
    parse_error: Exception | None,
    detections: Sequence[DetectionRecord],
    phrases: Sequence[ObjectPhrase],
) -> FailureClass | None:
    """Deterministic failure taxonomy for a completed run."""
    if parse_error is not None:
        if isinstance(parse_error, EmptyListError):
            return FailureClass(FailureKind.REASONER_EMPTY_LIST, str(parse_error))
        return FailureClass(FailureKind.REASONER_NO_MARKER, str(parse_error))
    assert answer is not None
    if phrases and not detections:
        return FailureClass(
            FailureKind.DETECTOR_MISSED_ALL,
            "detector found none of: " + ", ".join(p.normalized for p in phrases),
        )
    detected = {r.phrase.normalized for r in detections}
    missing = [p.normalized for p in phrases if p.normalized not in detected]
    if missing:
        return FailureClass(FailureKind.DETECTOR_PARTIAL, "undetected: " + ", ".join(missing))
    return None


def run_detection(
    image: ImageRef,
    query: str,
    config: PipelineConfig,
    reasoner: ReasonerBackend,
    detector: DetectorBackend,
    expected_counts: Mapping[str, int] | None = None,
    reprompt_query: Callable[[str], str] | None = None,
) -> PipelineResult:
    """Run one query against one image.

    Parser failures are not exceptions at this level: the result comes
    back with empty detections and a Reasoner* failure class. Backend
    failures are re-raised as :class:`BackendError` tagged with the
    stage that failed.

    Args:
        expected_counts: Optional phrase -> expected instance count; a
            lint note is attached when the detector returns more.
        reprompt_query: Off by default. When set and the first answer
            parses to an empty target list, the reasoner is asked once
            more with the rewritten query.
    """
    if not query:
        raise ValueError("query must be non-empty")
    timings: dict[str, float] = {}
    t_total = time.perf_counter()

    def ask(q: str) -> str:
        messages = [
            system_message(inference_system_prompt()),
            user_message(user_turn(q), image=image),
        ]
        try:
            return reasoner.reason(image, messages)
        except BackendError as e:
            e.stage = e.stage or "reason"
            raise

    t = time.perf_counter()
    answer_text = ask(query)
    timings["reason"] = (time.perf_counter() - t) * 1000.0

    t = time.perf_counter()
    answer: ReasonedAnswer | None = None
    parse_error: Exception | None = None
    try:
        answer = parse_answer(answer_text, max_tier=config.ladder_ceiling)
    except (NoMarkerError, EmptyListError) as e:
        parse_error = e
        answer = ReasonedAnswer(full_text=answer_text, reasoning=answer_text, phrases=(), tier=None)
    if isinstance(parse_error, EmptyListError) and reprompt_query is not None:
        answer_text = ask(reprompt_query(query))
        try:
            answer = parse_answer(answer_text, max_tier=config.ladder_ceiling)
            parse_error = None
        except (NoMarkerError, EmptyListError) as e:
            parse_error = e
            answer = ReasonedAnswer(full_text=answer_text, reasoning=answer_text, phrases=(), tier=None)
    timings["parse"] = (time.perf_counter() - t) * 1000.0

    detections: list[DetectionRecord] = []
    phrases = tuple(answer.phrases)
    if parse_error is None and phrases:
        forwarded = phrases[: config.max_phrases]
        t = time.perf_counter()
        try:
            raw_records = detector.detect(image, forwarded, detector.box_threshold)
        except BackendError as e:
            e.stage = e.stage or "detect"
            raise
        timings["detect"] = (time.perf_counter() - t) * 1000.0
        detections = filter_detections(raw_records, config.box_threshold)

    detected = {r.phrase.normalized for r in detections}
    undetected = tuple(p for p in phrases if p.normalized not in detected)

    lint_notes: list[str] = []
    if expected_counts:
        for norm, expected in expected_counts.items():
            got = sum(1 for r in detections if r.phrase.normalized == norm)
            if got > expected:
                lint_notes.append(f"{norm}: {got} detections, expected at most {expected}")

    timings["total"] = (time.perf_counter() - t_total) * 1000.0
    result = PipelineResult(
        query=query,
        image=image,
        answer=answer,
        detections=tuple(detections),
        undetected_phrases=undetected,
        failure=classify_failure(None if parse_error else answer, parse_error, detections, phrases),
        timings_ms=timings,
        lint_notes=tuple(lint_notes),
    )
    return result


def result_to_json_dict(result: PipelineResult, include_raw_answer: bool = True) -> dict:
    """Serialize a result to the stable, versioned JSON document."""
    answer_doc = None
    if result.answer is not None:
        answer_doc = {
            "reasoning": result.answer.reasoning,
            "phrases": [p.normalized for p in result.answer.phrases],
            "tier": result.answer.tier,
        }
        if include_raw_answer:
            answer_doc["full_text"] = result.answer.full_text
    detections = []
    for r in result.detections:
        det = {
            "phrase": r.phrase.normalized,
            "box": {"cx": r.box.cx, "cy": r.box.cy, "w": r.box.w, "h": r.box.h},
            "score": r.score,
            "box_px": None,
        }
        if result.image.width_px and result.image.height_px:
            w_img, h_img = result.image.width_px, result.image.height_px
            det["box_px"] = {
                "x": (r.box.cx - r.box.w / 2.0) * w_img,
                "y": (r.box.cy - r.box.h / 2.0) * h_img,
                "w": r.box.w * w_img,
                "h": r.box.h * h_img,
            }
        detections.append(det)
    return {
        "schema_version": "1",
        "query": result.query,
        "image": {
            "id": result.image.id,
            "width_px": result.image.width_px,
            "height_px": result.image.height_px,
        },
        "answer": answer_doc,
        "detections": detections,
        "undetected_phrases": [p.normalized for p in result.undetected_phrases],
        "failure": None
        if result.failure is None
        else {"kind": result.failure.kind.value, "detail": result.failure.detail},
        "lint_notes": list(result.lint_notes),
        "timings_ms": dict(result.timings_ms),
    }
