"""Instruction-dataset generation from caption + object annotations.

A text-only LLM is shown each image's captions and object list (plus two
worked examples) and asked for a detailed description and several
query-answer pairs; generations are parsed, validated against the
source annotations, and written as a JSON Lines dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class DatagenError(Exception):
    """Base class for dataset-generation failures."""


class MalformedFileError(DatagenError):
    """An annotation file could not be read; offset points at the problem."""

    def __init__(self, path: str, message: str, offset: int | None = None):
        self.path = path
        self.offset = offset
        where = f"{path}@{offset}" if offset is not None else path
        super().__init__(f"{where}: {message}")


class NoDescriptionError(DatagenError):
    """Generation text lacks a description section."""


class NoPairsError(DatagenError):
    """Generation text lacks a query-answer section (or it is empty)."""


class SchemaVersionMismatchError(DatagenError):
    """Dataset file header is missing or names an unsupported version."""


class InvariantViolationError(DatagenError):
    """A dataset line's stored targets disagree with the parse of its answer."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class JoinEmptyWarning(UserWarning):
    """An image had captions but no object annotations; it was skipped."""


#: Image statuses a run can record. "pending" exists only in-memory.
STATUSES = ("pending", "ok", "parse-failed", "validation-failed", "backend-failed")


@dataclass(frozen=True)
class GenerationPolicy:
    """Knobs for one generation run; sampling params are pass-through."""

    run_id: str = "run"
    workers: int = 1
    examples: tuple[int, ...] = (1, 2)
    sampling: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class GenerationRun:
    """Status of a run: per-image outcomes plus derived counters."""

    run_id: str
    out_dir: str
    statuses: dict[str, str] = field(default_factory=dict)
    dataset_path: str | None = None

    @property
    def counters(self) -> dict[str, int]:
        counts = {s: 0 for s in STATUSES}
        for status in self.statuses.values():
            counts[status] += 1
        counts["total"] = len(self.statuses)
        return counts

    @property
    def done(self) -> bool:
        return all(s != "pending" for s in self.statuses.values())
