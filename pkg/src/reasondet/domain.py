"""Core value types shared by every stage of the detection pipeline.

All types are immutable dataclasses: safe to share across threads and to
use as fixture values in tests. Nothing in this module touches pixels;
an :class:`ImageRef` is an opaque handle resolved by backends.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

# Characters never allowed inside a normalized phrase. Square and angle
# brackets would collide with the answer-list syntax downstream.
_BRACKET_CHARS = "[]<>⟨⟩"

# Punctuation stripped from the ends of a phrase (kept if interior).
_EDGE_PUNCT = ".,;:!?\"'`()-_*"

_ARTICLES = ("a ", "an ", "the ")

_WS_RE = re.compile(r"\s+")


class DomainError(ValueError):
    """Invalid value for one of the core domain types."""


@dataclass(frozen=True)
class ImageRef:
    """Opaque reference to an image.

    Attributes:
        id: Non-empty identifier, stable across the pipeline (file name,
            dataset id, upload name).
        source: Where the bytes live: a file path, a URL, or an inline
            base64 payload. Never dereferenced by this package itself.
        width_px, height_px: Pixel dimensions once known; ``None`` until
            resolved by whatever loaded the image.
    """

    id: str
    source: str = ""
    width_px: int | None = None
    height_px: int | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise DomainError("ImageRef.id must be non-empty")
        for name, v in (("width_px", self.width_px), ("height_px", self.height_px)):
            if v is not None and v < 1:
                raise DomainError(f"ImageRef.{name} must be >= 1, got {v}")


@dataclass(frozen=True)
class ObjectPhrase:
    """A noun phrase naming a detection target.

    ``raw`` is the phrase as the reasoner produced it; ``normalized`` is
    the canonical form used for equality, deduplication and detector
    requests.
    """

    raw: str
    normalized: str

    def __post_init__(self) -> None:
        if not self.normalized:
            raise DomainError("ObjectPhrase.normalized must be non-empty")
        if self.normalized != self.normalized.strip():
            raise DomainError("ObjectPhrase.normalized must have no outer whitespace")
        if any(c in self.normalized for c in _BRACKET_CHARS):
            raise DomainError("ObjectPhrase.normalized must not contain brackets")


def normalize_phrase(raw: str) -> ObjectPhrase:
    """Canonicalize a raw phrase into an :class:`ObjectPhrase`.

    Lowercases, trims, collapses interior whitespace, removes bracket
    characters, strips surrounding punctuation and leading English
    articles. Idempotent: normalizing an already-normalized form is a
    no-op.

    Raises:
        DomainError: if nothing is left after normalization (e.g. the
            input was only punctuation).
    """
    text = raw.lower()
    for c in _BRACKET_CHARS:
        text = text.replace(c, " ")
    text = _WS_RE.sub(" ", text).strip()
    # Strip edge punctuation and articles to a fixpoint: each strip can
    # expose another ("'the kite.'" -> "the kite" -> "kite").
    while True:
        before = text
        text = text.strip(_EDGE_PUNCT).strip()
        for article in _ARTICLES:
            if text.startswith(article):
                text = text[len(article) :].lstrip()
        if text == before:
            break
    if not text:
        raise DomainError(f"phrase normalizes to nothing: {raw!r}")
    return ObjectPhrase(raw=raw.strip(), normalized=text)


def dedupe_phrases(phrases: list[ObjectPhrase]) -> list[ObjectPhrase]:
    """Drop later duplicates by normalized form; order-stable."""
    seen: set[str] = set()
    out: list[ObjectPhrase] = []
    for p in phrases:
        if p.normalized not in seen:
            seen.add(p.normalized)
            out.append(p)
    return out


@dataclass(frozen=True)
class BoundingBox:
    """Normalized center-size box: all fields are fractions of the image.

    Corner form is derived on demand and never stored.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise DomainError(f"box center outside [0,1]: ({self.cx}, {self.cy})")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise DomainError(f"box size outside (0,1]: ({self.w}, {self.h})")

    def corners(self) -> tuple[float, float, float, float]:
        """Return (x1, y1, x2, y2) corner form."""
        return (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )


def validate_box(cx: float, cy: float, w: float, h: float) -> tuple[BoundingBox, bool]:
    """Build a :class:`BoundingBox`, clamping it into the unit square.

    Returns the validated box and a flag that is True iff clamping
    changed anything. Validating an already-valid box returns it
    unchanged with the flag unset, so the operation is idempotent.

    Raises:
        DomainError: if the box is degenerate (w or h <= 0) before or
            after clamping.
    """
    if w <= 0.0 or h <= 0.0:
        raise DomainError(f"degenerate box size: w={w}, h={h}")
    ox, oy, ow, oh = cx, cy, w, h

    def in_bounds(cx: float, cy: float, w: float, h: float) -> bool:
        return (
            0.0 <= cx - w / 2.0
            and cx + w / 2.0 <= 1.0
            and 0.0 <= cy - h / 2.0
            and cy + h / 2.0 <= 1.0
        )

    # Clamp in corner space, then recompute the center-size form. Repeat
    # to a fixpoint: the float round-trip corner -> center -> corner can
    # land a hair outside the unit square, and the fixpoint guarantees
    # the stored box re-validates with no further change. Boxes already
    # in bounds are returned untouched.
    for _ in range(64):
        if in_bounds(cx, cy, w, h):
            break
        x1 = min(max(cx - w / 2.0, 0.0), 1.0)
        y1 = min(max(cy - h / 2.0, 0.0), 1.0)
        x2 = min(max(cx + w / 2.0, 0.0), 1.0)
        y2 = min(max(cy + h / 2.0, 0.0), 1.0)
        ncx, ncy = (x1 + x2) / 2.0, (y1 + y2) / 2.0
        nw, nh = x2 - x1, y2 - y1
        if (ncx, ncy, nw, nh) == (cx, cy, w, h):
            break
        cx, cy, w, h = ncx, ncy, nw, nh
    if w <= 0.0 or h <= 0.0:
        raise DomainError(f"box fully outside the unit square: ({ox}, {oy}, {ow}, {oh})")
    clamped = (cx, cy, w, h) != (ox, oy, ow, oh)
    return BoundingBox(cx=cx, cy=cy, w=w, h=h), clamped


@dataclass(frozen=True)
class DetectionRecord:
    """One localized object: which phrase, where, how confident."""

    phrase: ObjectPhrase
    box: BoundingBox
    score: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise DomainError(f"score outside [0,1]: {self.score}")


@dataclass(frozen=True)
class ReasonedAnswer:
    """The reasoner's full output split into prose and extracted targets.

    Attributes:
        full_text: The answer exactly as returned by the reasoner.
        reasoning: Text before the answer marker.
        phrases: Extracted target phrases, deduplicated by normalized
            form (first occurrence wins).
        tier: Identifier of the marker-matching rule that fired
            ("T0".."T3"), or ``None`` when the answer was synthesized
            without parsing.
    """

    full_text: str
    reasoning: str
    phrases: tuple[ObjectPhrase, ...]
    tier: str | None = None

    def __post_init__(self) -> None:
        if not self.full_text.startswith(self.reasoning):
            raise DomainError("reasoning must be a prefix of full_text")
        normals = [p.normalized for p in self.phrases]
        if len(normals) != len(set(normals)):
            raise DomainError("phrases must be deduplicated by normalized form")


@dataclass(frozen=True)
class QAPair:
    """An instruction (query) with its formatted answer and target list.

    ``targets`` restates the parse of ``answer``; loaders re-check that
    redundancy instead of trusting the stored list.
    """

    query: str
    answer: str
    targets: tuple[ObjectPhrase, ...]


@dataclass(frozen=True)
class ImageAnnotationRecord:
    """Caption and object annotations for one image (datagen input)."""

    image: ImageRef
    captions: tuple[str, ...]
    objects: tuple[ObjectPhrase, ...]

    def __post_init__(self) -> None:
        if not self.captions:
            raise DomainError("ImageAnnotationRecord.captions must be non-empty")
        if not self.objects:
            raise DomainError("ImageAnnotationRecord.objects must be non-empty")
        normals = [p.normalized for p in self.objects]
        if len(normals) != len(set(normals)):
            raise DomainError("objects must be deduplicated by normalized form")


@dataclass(frozen=True)
class GeneratedRecord:
    """Datagen output for one image: a description plus validated pairs."""

    image: ImageRef
    description: str
    pairs: tuple[QAPair, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.description:
            raise DomainError("GeneratedRecord.description must be non-empty")
        if not self.pairs:
            raise DomainError("GeneratedRecord.pairs must be non-empty")
