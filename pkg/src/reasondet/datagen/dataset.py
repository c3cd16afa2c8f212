"""Dataset file format: JSON Lines with a header line.

Line 1 is ``{"kind": "header", "schema_version": "1"}`` (plus run
provenance); every following line is one pair:
``{image_id, query, answer, targets, provenance: {run_id,
template_versions}}``. Loading re-derives each line's targets from its
answer text instead of trusting the stored list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from ..parsing import ParseError, parse_answer
from . import InvariantViolationError, SchemaVersionMismatchError

SCHEMA_VERSION = "1"

#: Published scale of the reference corpus this pipeline reproduces:
#: roughly thirty thousand pairs over five thousand images.
REFERENCE_PAIRS_PER_IMAGE = 30000 / 5000


@dataclass(frozen=True)
class DatasetRow:
    image_id: str
    query: str
    answer: str
    targets: tuple[str, ...]
    provenance: dict


def write_dataset(
    path: str | Path,
    rows: Iterable[tuple[str, dict]],
    run_id: str,
    template_versions: dict[str, str],
) -> int:
    """Write (image_id, pair) rows; returns the number of pairs written."""
    provenance = {"run_id": run_id, "template_versions": template_versions}
    header = {"kind": "header", "schema_version": SCHEMA_VERSION, "provenance": provenance}
    n = 0
    tmp = Path(path).with_suffix(".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, ensure_ascii=False, sort_keys=True) + "\n")
        for image_id, pair in rows:
            line = {
                "image_id": image_id,
                "query": pair["query"],
                "answer": pair["answer"],
                "targets": list(pair["targets"]),
                "provenance": provenance,
            }
            fh.write(json.dumps(line, ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    tmp.replace(Path(path))
    return n


def load_dataset(path: str | Path) -> Iterator[DatasetRow]:
    """Stream dataset rows, re-checking the targets == parse(answer) invariant.

    Raises:
        SchemaVersionMismatchError: bad or missing header line.
        InvariantViolationError: stored targets disagree with the parse
            of the answer (named with its 1-based line number).
    """
    lines = Path(path).read_text("utf-8").splitlines()
    if not lines:
        raise SchemaVersionMismatchError(f"{path}: empty file, no header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise SchemaVersionMismatchError(f"{path}: unreadable header: {e}") from e
    if header.get("kind") != "header" or header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"{path}: expected header with schema_version {SCHEMA_VERSION}, got {header!r}"
        )
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise InvariantViolationError(line_no, f"unreadable line: {e}") from e
        try:
            parsed = [p.normalized for p in parse_answer(obj["answer"]).phrases]
        except ParseError as e:
            raise InvariantViolationError(line_no, f"answer does not parse: {e}") from e
        stored = list(obj.get("targets", []))
        if parsed != stored:
            raise InvariantViolationError(line_no, f"targets {stored} != parse of answer {parsed}")
        yield DatasetRow(
            image_id=str(obj["image_id"]),
            query=obj["query"],
            answer=obj["answer"],
            targets=tuple(stored),
            provenance=obj.get("provenance", {}),
        )


def dataset_stats(path: str | Path) -> dict:
    """Summarize a dataset file for the stats report."""
    images: set[str] = set()
    pairs = 0
    for row in load_dataset(path):
        images.add(row.image_id)
        pairs += 1
    mean = pairs / len(images) if images else 0.0
    return {
        "images": len(images),
        "pairs": pairs,
        "pairs_per_image_mean": mean,
        "reference_pairs_per_image": REFERENCE_PAIRS_PER_IMAGE,
    }


def format_stats(stats: dict) -> str:
    return (
        f"images: {stats['images']}\n"
        f"pairs: {stats['pairs']}\n"
        f"pairs/image mean: {stats['pairs_per_image_mean']:.1f} "
        f"(reference corpus: {stats['reference_pairs_per_image']:.1f})"
    )
