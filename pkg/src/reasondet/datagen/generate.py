"""Parsing and validation of LLM generations, and the run driver."""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..backends import TextLLMBackend
from ..backends.errors import BackendError
from ..domain import ImageAnnotationRecord, QAPair
from ..parsing import ParseError, parse_answer
from ..prompts import datagen_messages, load_manifest
from . import GenerationPolicy, GenerationRun, NoDescriptionError, NoPairsError
from .dataset import write_dataset

# Headers may carry bold markup with the colon inside or outside it.
_DESCRIPTION_RE = re.compile(
    r"^\s*(?:\*\*)?description\s*(?:\*\*)?\s*:\s*(?:\*\*)?\s*", re.IGNORECASE | re.MULTILINE
)
_QA_RE = re.compile(
    r"^\s*(?:\*\*)?query and answer\s*(?:\*\*)?\s*:\s*(?:\*\*)?\s*", re.IGNORECASE | re.MULTILINE
)
_ITEM_RE = re.compile(r"^\s*\d+\s*[.)]\s*", re.MULTILINE)
_PAIR_RE = re.compile(r"Query:\s*(?P<query>.*?)\s*Answer:\s*(?P<answer>.*)", re.DOTALL)


@dataclass(frozen=True)
class ParsedGeneration:
    description: str
    pairs: tuple[QAPair, ...]
    pair_errors: tuple[str, ...]


def parse_generation(text: str) -> ParsedGeneration:
    """Split a generation into its description and query-answer pairs.

    Individual pairs that fail to parse are dropped and reported in
    ``pair_errors`` (partial success is fine); missing sections are not.

    Raises:
        NoDescriptionError: no description header, or an empty one.
        NoPairsError: no query-answer section, or no numbered items in it.
    """
    if not text:
        raise NoDescriptionError("empty generation")
    desc_m = _DESCRIPTION_RE.search(text)
    if not desc_m:
        raise NoDescriptionError("no description header found")
    qa_m = _QA_RE.search(text)
    description = text[desc_m.end() : qa_m.start() if qa_m else len(text)].strip()
    if not description:
        raise NoDescriptionError("description section is empty")
    if not qa_m:
        raise NoPairsError("no query-answer header found")

    qa_text = text[qa_m.end() :]
    chunks = [c.strip() for c in _ITEM_RE.split(qa_text) if c.strip()]
    if not chunks:
        raise NoPairsError("query-answer section has no numbered items")

    pairs: list[QAPair] = []
    errors: list[str] = []
    for i, chunk in enumerate(chunks, start=1):
        m = _PAIR_RE.match(chunk)
        if not m:
            errors.append(f"item {i}: no 'Query: ... Answer: ...' shape")
            continue
        query, answer = m.group("query").strip(), m.group("answer").strip()
        try:
            targets = parse_answer(answer).phrases
        except ParseError as e:
            errors.append(f"item {i}: {e}")
            continue
        pairs.append(QAPair(query=query, answer=answer, targets=targets))
    if not pairs and errors:
        raise NoPairsError("every numbered item failed to parse: " + "; ".join(errors))
    return ParsedGeneration(description=description, pairs=tuple(pairs), pair_errors=tuple(errors))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    pair_index: int
    checks: tuple[CheckResult, ...]

    @property
    def accepted(self) -> bool:
        return all(c.passed for c in self.checks)


def _normalize_caption(caption: str) -> str:
    return re.sub(r"\s+", " ", caption.lower()).strip()


def validate_pair(pair: QAPair, record: ImageAnnotationRecord, pair_index: int = 0) -> ValidationReport:
    """Check one generated pair against its source annotations.

    Containment passes when every target is named in the object list or
    appears verbatim (normalized) inside some caption; the other checks
    are format (answer re-parses to the stored targets), nonempty-answer
    and target dedup.
    """
    checks: list[CheckResult] = []

    try:
        reparsed = [p.normalized for p in parse_answer(pair.answer).phrases]
        stored = [p.normalized for p in pair.targets]
        if reparsed == stored:
            checks.append(CheckResult("format", True))
        else:
            checks.append(CheckResult("format", False, f"stored {stored} != parsed {reparsed}"))
    except ParseError as e:
        checks.append(CheckResult("format", False, str(e)))

    object_names = {p.normalized for p in record.objects}
    captions = [_normalize_caption(c) for c in record.captions]
    missing = [
        t.normalized
        for t in pair.targets
        if t.normalized not in object_names and not any(t.normalized in c for c in captions)
    ]
    checks.append(
        CheckResult("containment", not missing, f"not evidenced: {', '.join(missing)}" if missing else "")
    )

    checks.append(CheckResult("nonempty-answer", bool(pair.answer.strip()), ""))

    normals = [p.normalized for p in pair.targets]
    checks.append(
        CheckResult("dedup", len(normals) == len(set(normals)), "duplicate targets" if len(normals) != len(set(normals)) else "")
    )
    return ValidationReport(pair_index=pair_index, checks=tuple(checks))


def _atomic_write_json(path: Path, obj: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=True) + "\n", "utf-8")
    tmp.replace(path)


def image_status_path(out_dir: Path, image_id: str) -> Path:
    return out_dir / "records" / f"{image_id}.json"


def _process_image(
    record: ImageAnnotationRecord, llm: TextLLMBackend, policy: GenerationPolicy, out_dir: Path
) -> None:
    """Generate, parse and validate one image; write its status atomically."""
    status: dict = {"image_id": record.image.id, "status": "ok", "pairs": [], "errors": []}
    try:
        text = llm.complete_text(datagen_messages(record, policy.examples))
        parsed = parse_generation(text)
        status["description"] = parsed.description
        status["errors"].extend(parsed.pair_errors)
        for i, pair in enumerate(parsed.pairs):
            report = validate_pair(pair, record, pair_index=i)
            if report.accepted:
                status["pairs"].append(
                    {
                        "query": pair.query,
                        "answer": pair.answer,
                        "targets": [p.normalized for p in pair.targets],
                    }
                )
            else:
                failed = [c for c in report.checks if not c.passed]
                status["errors"].append(
                    f"pair {i} rejected: " + "; ".join(f"{c.name}: {c.detail}" for c in failed)
                )
        if not status["pairs"]:
            status["status"] = "validation-failed"
    except (NoDescriptionError, NoPairsError) as e:
        status["status"] = "parse-failed"
        status["errors"].append(str(e))
    except BackendError as e:
        status["status"] = "backend-failed"
        status["errors"].append(str(e))
    _atomic_write_json(image_status_path(out_dir, record.image.id), status)


def generate_dataset(
    records: Iterable[ImageAnnotationRecord],
    llm: TextLLMBackend,
    out_dir: str | Path,
    policy: GenerationPolicy | None = None,
) -> GenerationRun:
    """Run generation over the records and assemble the dataset.

    Per-image outcomes land as atomic files under ``out_dir/records/``,
    which makes the run resumable: images with an existing status file
    are skipped (no LLM call), and an interrupted run picks up where it
    stopped. The dataset and manifest are rebuilt from the status files
    at the end of every (re)run.
    """
    policy = policy or GenerationPolicy()
    out = Path(out_dir)
    (out / "records").mkdir(parents=True, exist_ok=True)
    records = list(records)

    pending = [r for r in records if not image_status_path(out, r.image.id).is_file()]
    if policy.workers == 1:
        for record in pending:
            _process_image(record, llm, policy, out)
    else:
        with ThreadPoolExecutor(max_workers=policy.workers) as pool:
            futures = [pool.submit(_process_image, r, llm, policy, out) for r in pending]
            for f in futures:
                f.result()

    run = GenerationRun(run_id=policy.run_id, out_dir=str(out))
    statuses: dict[str, dict] = {}
    for record in records:
        path = image_status_path(out, record.image.id)
        if path.is_file():
            status = json.loads(path.read_text("utf-8"))
        else:
            status = {"image_id": record.image.id, "status": "pending", "pairs": []}
        statuses[record.image.id] = status
        run.statuses[record.image.id] = status["status"]

    template_versions = {t["name"]: t["version"] for t in load_manifest()["templates"]}
    dataset_path = out / "dataset.jsonl"
    write_dataset(
        dataset_path,
        _dataset_rows(records, statuses),
        run_id=policy.run_id,
        template_versions=template_versions,
    )
    run.dataset_path = str(dataset_path)

    _atomic_write_json(
        out / "manifest.json",
        {
            "schema_version": "1",
            "run_id": policy.run_id,
            "single_call_layout": True,
            "examples": list(policy.examples),
            "sampling": policy.sampling,
            "template_versions": template_versions,
            "counters": run.counters,
            "per_image": {i: s["status"] for i, s in statuses.items()},
        },
    )
    return run


def _dataset_rows(
    records: Sequence[ImageAnnotationRecord], statuses: dict[str, dict]
) -> Iterable[tuple[str, dict]]:
    for record in records:
        status = statuses.get(record.image.id, {})
        for pair in status.get("pairs", []):
            yield record.image.id, pair
