"""Extraction of target-object lists from reasoner answers.

The reasoner is prompted to close its answer with a marker and a
bracketed list ("Therefore the answer is: [kite, chair]"). Real model
output drifts from that format, so matching walks a tolerance ladder
from the exact marker down to progressively looser variants, and every
parse records which rung fired.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .domain import DomainError, ObjectPhrase, ReasonedAnswer, dedupe_phrases, normalize_phrase

log = logging.getLogger(__name__)

MARKER = "Therefore the answer is:"

#: Ladder order, strictest first. A lower rung is consulted only when
#: every rung above it found no match anywhere in the text.
TIERS = ("T0", "T1", "T2", "T3")

_TIER_PATTERNS: dict[str, re.Pattern[str]] = {
    # T0: the marker, byte-exact.
    "T0": re.compile(re.escape(MARKER)),
    # T1: case-insensitive, optional opening angle bracket, any interior
    # whitespace run.
    "T1": re.compile(r"[<⟨]?\s*therefore\s+the\s+answer\s+is\s*:", re.IGNORECASE),
    # T2: observed drift where a colon lands after "answer", optionally
    # followed by one or more "is:" fragments ("Therefore the Answer: is:").
    "T2": re.compile(r"therefore\s+the\s+answer\s*:(?:\s*is\s*:)*", re.IGNORECASE),
    # T3: last resort, the bare tail of the marker.
    "T3": re.compile(r"the\s+answer\s+is\s*:", re.IGNORECASE),
}

#: Items that normalize to a bare negation are reasoning artifacts
#: ("no cake can be found"), never detector targets.
_NEGATIONS = frozenset({"no", "none", "nothing"})

_SENTENCE_END = re.compile(r"[.!?\n]")


class ParseError(ValueError):
    """Base class for answer-parse failures."""


class NoMarkerError(ParseError):
    """No rung of the tolerance ladder matched."""

    def __init__(self, tried: tuple[str, ...]):
        self.tried = tried
        super().__init__(f"no answer marker found (tried {', '.join(tried)})")


class EmptyListError(ParseError):
    """A marker matched but no phrase survived normalization."""

    def __init__(self, tier: str):
        self.tier = tier
        super().__init__(f"marker matched at tier {tier} but the target list is empty")


def _extract_list_text(rest: str) -> str:
    """Return the raw list text following a matched marker.

    Prefers the first balanced ``[...]`` group; without brackets, takes
    everything up to the first sentence terminator.
    """
    start = rest.find("[")
    if start != -1:
        depth = 0
        for i in range(start, len(rest)):
            if rest[i] == "[":
                depth += 1
            elif rest[i] == "]":
                depth -= 1
                if depth == 0:
                    return rest[start + 1 : i]
    m = _SENTENCE_END.search(rest)
    return rest[: m.start()] if m else rest


def _split_items(list_text: str) -> list[str]:
    """Split a comma-separated list; the final item also splits on " and "."""
    items = [item for item in list_text.split(",")]
    if items:
        last = items.pop()
        items.extend(last.split(" and "))
    return items


def parse_answer(text: str, max_tier: str = "T3") -> ReasonedAnswer:
    """Parse a reasoner answer into reasoning text plus target phrases.

    The ladder is walked strictest-first and, within the first rung that
    matches at all, the LAST occurrence wins: the format prompt puts the
    list in the final step, and reasoning prose may quote the marker.

    Args:
        text: Full answer text, non-empty.
        max_tier: Ladder ceiling; rungs below it are never consulted.

    Raises:
        NoMarkerError: no rung up to ``max_tier`` matched.
        EmptyListError: a rung matched but the list normalized to nothing.
    """
    if not text:
        raise ParseError("answer text must be non-empty")
    if max_tier not in TIERS:
        raise ParseError(f"unknown tier ceiling: {max_tier!r}")
    tried = TIERS[: TIERS.index(max_tier) + 1]
    for tier in tried:
        matches = list(_TIER_PATTERNS[tier].finditer(text))
        if not matches:
            continue
        marker = matches[-1]
        phrases: list[ObjectPhrase] = []
        for item in _split_items(_extract_list_text(text[marker.end() :])):
            try:
                phrase = normalize_phrase(item)
            except DomainError:
                continue
            if phrase.normalized in _NEGATIONS:
                log.warning("dropping negation artifact %r from target list", item.strip())
                continue
            phrases.append(phrase)
        phrases = dedupe_phrases(phrases)
        if not phrases:
            raise EmptyListError(tier)
        return ReasonedAnswer(
            full_text=text,
            reasoning=text[: marker.start()].rstrip(),
            phrases=tuple(phrases),
            tier=tier,
        )
    raise NoMarkerError(tuple(tried))


def format_answer(reasoning: str, phrases: Iterable[ObjectPhrase]) -> str:
    """Render reasoning plus phrases in the canonical answer format.

    Inverse of :func:`parse_answer` at tier T0 for marker-free reasoning
    and normalized phrase lists.
    """
    items = [p.normalized for p in phrases]
    if not items:
        raise ParseError("phrase list must be non-empty")
    return f"{reasoning} {MARKER} [{', '.join(items)}]"


@dataclass(frozen=True)
class CorpusCase:
    """One parser-corpus case: input text and the expected exact parse."""

    id: str
    text: str
    expected_phrases: tuple[str, ...]
    expected_tier: str


def load_corpus(path: str | Path) -> list[CorpusCase]:
    """Load a JSON Lines parser corpus ({id, text, expected_phrases, expected_tier})."""
    cases = []
    for line_no, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            case = CorpusCase(
                id=obj.get("id", f"line{line_no}"),
                text=obj["text"],
                expected_phrases=tuple(obj["expected_phrases"]),
                expected_tier=obj["expected_tier"],
            )
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise ParseError(f"{path}:{line_no}: bad corpus line: {e}") from e
        cases.append(case)
    return cases
