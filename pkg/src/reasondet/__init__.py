"""reasondet: instruction-driven object detection orchestration.

A multimodal reasoner turns a natural-language instruction into a list
of target object phrases; an open-vocabulary detector localizes them.
This package provides the prompt protocol, the answer parser, backend
clients with deterministic replay mocks, the end-to-end pipeline, the
instruction-dataset generator, the tuning-sample format with its
reference loss, and an HTTP service + CLI on top.
"""

from .domain import (
    BoundingBox,
    DetectionRecord,
    ImageAnnotationRecord,
    ImageRef,
    ObjectPhrase,
    QAPair,
    ReasonedAnswer,
    normalize_phrase,
    validate_box,
)
from .parsing import format_answer, parse_answer
from .pipeline import PipelineConfig, PipelineResult, run_detection

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "DetectionRecord",
    "ImageAnnotationRecord",
    "ImageRef",
    "ObjectPhrase",
    "PipelineConfig",
    "PipelineResult",
    "QAPair",
    "ReasonedAnswer",
    "format_answer",
    "normalize_phrase",
    "parse_answer",
    "run_detection",
    "validate_box",
]
