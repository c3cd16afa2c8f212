"""Instruction-tuning sample serialization and the reference loss.

The loss here is bookkeeping, not learning: given token log-probs
scored by an external model, it sums the negative log-likelihood over
answer tokens only. No tokenizer and no network live in this package;
token ids are opaque and log-probs arrive precomputed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .domain import QAPair
from .prompts import inference_system_prompt, training_sequence

FILE_HEADER = "# reasondet-training v1"


class TuningError(ValueError):
    """Invalid tuning sample or loss input."""


@dataclass(frozen=True)
class TrainingSample:
    """One serialized tuning sample with located spans.

    Spans are half-open offsets into :meth:`full_text` (input text, one
    space, answer text). They are disjoint, in-bounds, and the answer
    span always slices out exactly ``answer_text``.
    """

    image_id: str
    input_text: str
    answer_text: str
    image_slot: tuple[int, int]
    query: tuple[int, int]
    answer: tuple[int, int]

    @property
    def full_text(self) -> str:
        return f"{self.input_text} {self.answer_text}"

    def spans(self) -> dict[str, tuple[int, int]]:
        return {"image_slot": self.image_slot, "query": self.query, "answer": self.answer}

    def validate(self) -> None:
        text = self.full_text
        spans = sorted(self.spans().items(), key=lambda kv: kv[1][0])
        prev_end = 0
        for name, (start, end) in spans:
            if not (0 <= start <= end <= len(text)):
                raise TuningError(f"span {name} out of bounds: {(start, end)}")
            if start < prev_end:
                raise TuningError(f"span {name} overlaps its predecessor")
            prev_end = end
        if text[self.answer[0] : self.answer[1]] != self.answer_text:
            raise TuningError("answer span does not cover answer_text")


def serialize_sample(image_id: str, pair: QAPair, include_system_prompt: bool = False) -> TrainingSample:
    """Serialize one query-answer pair into a tuning sample.

    By default the sample carries the user-prompt suffix but no system
    prompt (the manifest's ``tuning_includes_system_prompt`` flag);
    passing ``include_system_prompt=True`` prepends it as its own line.
    """
    seq = training_sequence(pair.query)
    prefix = ""
    if include_system_prompt:
        prefix = f"###System: {inference_system_prompt()}\n"
    shift = len(prefix)
    input_text = prefix + seq.text
    sample = TrainingSample(
        image_id=image_id,
        input_text=input_text,
        answer_text=pair.answer,
        image_slot=(seq.image_slot[0] + shift, seq.image_slot[1] + shift),
        query=(seq.query[0] + shift, seq.query[1] + shift),
        answer=(len(input_text) + 1, len(input_text) + 1 + len(pair.answer)),
    )
    sample.validate()
    return sample


@dataclass(frozen=True)
class TokenizedAnswer:
    """Externally scored tokens: ids, log-probs and the answer mask."""

    tokens: tuple[int, ...]
    logprobs: tuple[float, ...]
    answer_mask: tuple[bool, ...]

    def __post_init__(self) -> None:
        if not (len(self.tokens) == len(self.logprobs) == len(self.answer_mask)):
            raise TuningError(
                f"length mismatch: {len(self.tokens)} tokens, "
                f"{len(self.logprobs)} logprobs, {len(self.answer_mask)} mask bits"
            )
        if any(lp > 0.0 for lp in self.logprobs):
            raise TuningError("logprobs must be <= 0")
        if not any(self.answer_mask):
            raise TuningError("answer_mask must select at least one token")


def lm_loss(t: TokenizedAnswer) -> float:
    """Negative log-likelihood summed over answer tokens.

    Pure arithmetic over the supplied log-probs; tokens outside the
    answer mask contribute nothing.
    """
    return -sum(lp for lp, m in zip(t.logprobs, t.answer_mask) if m)


def lm_loss_per_token(t: TokenizedAnswer) -> float:
    """The summed loss divided by the number of answer tokens."""
    return lm_loss(t) / sum(1 for m in t.answer_mask if m)


def export_training_file(samples: Iterable[TrainingSample], path: str | Path) -> int:
    """Write samples as JSON Lines under a version-comment header.

    Every sample is re-validated before anything is written; a bad span
    rejects the whole export.
    """
    samples = list(samples)
    for s in samples:
        s.validate()
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(FILE_HEADER + "\n")
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "image_id": s.image_id,
                        "input_text": s.input_text,
                        "answer_text": s.answer_text,
                        "spans": {k: list(v) for k, v in s.spans().items()},
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )
    return len(samples)


def load_training_file(path: str | Path) -> Iterator[TrainingSample]:
    lines = Path(path).read_text("utf-8").splitlines()
    if not lines or not lines[0].startswith(FILE_HEADER):
        raise TuningError(f"{path}: missing {FILE_HEADER!r} header")
    for line in lines[1:]:
        if not line.strip() or line.startswith("#"):
            continue
        obj = json.loads(line)
        spans = obj["spans"]
        sample = TrainingSample(
            image_id=obj["image_id"],
            input_text=obj["input_text"],
            answer_text=obj["answer_text"],
            image_slot=tuple(spans["image_slot"]),
            query=tuple(spans["query"]),
            answer=tuple(spans["answer"]),
        )
        sample.validate()
        yield sample
