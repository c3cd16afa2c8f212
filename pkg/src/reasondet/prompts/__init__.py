"""Prompt construction for the reasoner, the tuning format and datagen.

Every template lives as a versioned UTF-8 asset next to this module (see
``assets/manifest.json``), not as a string literal: a transcription fix
is a data change, and tests diff the emitted bytes against checked-in
golden files. All functions here are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Literal

from ..domain import ImageAnnotationRecord, ImageRef

IMAGE_SLOT = "<ImageHere>"
TEXT_SLOT = "<TextHere>"
USER_PROMPT_SLOT = "<User_Prompt>"

Role = Literal["system", "user", "assistant"]


class PromptError(ValueError):
    """Bad input to a prompt constructor (empty query, slot collision)."""


@dataclass(frozen=True)
class TextPart:
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.text, str):
            raise PromptError("text part must be a string")


@dataclass(frozen=True)
class ImagePart:
    image: ImageRef


@dataclass(frozen=True)
class ChatMessage:
    """One wire-level chat turn: a role plus ordered text/image parts."""

    role: Role
    parts: tuple[TextPart | ImagePart, ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise PromptError("ChatMessage.parts must be non-empty")
        if self.role != "user" and any(isinstance(p, ImagePart) for p in self.parts):
            raise PromptError("image parts are only allowed in user messages")

    @property
    def text(self) -> str:
        """Concatenated text parts (image parts contribute nothing)."""
        return "".join(p.text for p in self.parts if isinstance(p, TextPart))


def system_message(text: str) -> ChatMessage:
    return ChatMessage(role="system", parts=(TextPart(text),))


def user_message(text: str, image: ImageRef | None = None) -> ChatMessage:
    parts: tuple[TextPart | ImagePart, ...] = (TextPart(text),)
    if image is not None:
        parts = parts + (ImagePart(image),)
    return ChatMessage(role="user", parts=parts)


def assistant_message(text: str) -> ChatMessage:
    return ChatMessage(role="assistant", parts=(TextPart(text),))


@dataclass(frozen=True)
class PromptTemplate:
    """A named, versioned template body with declared placeholders."""

    name: str
    version: str
    body: str
    placeholder_names: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        for slot in (IMAGE_SLOT, TEXT_SLOT, USER_PROMPT_SLOT):
            in_body = slot in self.body
            declared = slot in self.placeholder_names
            if in_body != declared:
                raise PromptError(
                    f"template {self.name}: placeholder {slot} "
                    f"{'present in body but undeclared' if in_body else 'declared but absent'}"
                )


# Overridable asset root: the packaged assets by default, or an operator
# directory set at service startup.
_TEMPLATE_ROOT: str | None = None
_ASSET_CACHE: dict[str, str] = {}


def set_template_root(path: str | None) -> None:
    """Load templates from ``path`` instead of the packaged assets."""
    global _TEMPLATE_ROOT
    _TEMPLATE_ROOT = path
    _ASSET_CACHE.clear()


def _read_raw(filename: str) -> str:
    if filename in _ASSET_CACHE:
        return _ASSET_CACHE[filename]
    if _TEMPLATE_ROOT is not None:
        from pathlib import Path

        text = (Path(_TEMPLATE_ROOT) / filename).read_text("utf-8")
    else:
        text = resources.files(__package__).joinpath("assets", filename).read_text("utf-8")
    _ASSET_CACHE[filename] = text
    return text


def _read_asset(filename: str) -> str:
    text = _read_raw(filename).replace("\r\n", "\n").replace("\r", "\n")
    return text[:-1] if text.endswith("\n") else text


def load_manifest() -> dict:
    """Parse the template manifest (names, versions, layout flags)."""
    return json.loads(_read_raw("manifest.json"))


def load_template(name: str) -> PromptTemplate:
    """Load a template by manifest name.

    The body is the asset file with line endings normalized to LF and
    the single trailing newline removed.
    """
    manifest = load_manifest()
    for entry in manifest["templates"]:
        if entry["name"] == name:
            return PromptTemplate(
                name=name,
                version=entry["version"],
                body=_read_asset(entry["file"]),
                placeholder_names=frozenset(entry["placeholders"]),
            )
    raise KeyError(f"unknown template: {name}")


def inference_system_prompt() -> str:
    """The step-by-step system prompt sent to the reasoner."""
    return load_template("inference_system").body


def user_suffix() -> str:
    """The format-pinning suffix appended to every user query."""
    return load_template("user_suffix").body


def user_turn(query: str) -> str:
    """Render a user turn: the query, one space, and the suffix."""
    if not query:
        raise PromptError("query must be non-empty")
    return f"{query} {user_suffix()}"


@dataclass(frozen=True)
class TrainingSequence:
    """Instantiated tuning-input text with located spans.

    ``image_slot`` and ``query`` are half-open [start, end) byte offsets
    into ``text`` (the text is pure ASCII-safe UTF-8; offsets are in
    characters, which equal bytes for every shipped template).
    """

    text: str
    image_slot: tuple[int, int]
    query: tuple[int, int]


def training_sequence(query: str) -> TrainingSequence:
    """Instantiate the human-turn skeleton for one tuning sample.

    The query replaces the text slot and the standard user suffix
    replaces the prompt slot; the image slot token stays literal for the
    consumer that splices in image features.

    Raises:
        PromptError: empty query, or a query that embeds one of the slot
            tokens (the output must contain the image slot exactly once
            and no unfilled slots).
    """
    if not query:
        raise PromptError("query must be non-empty")
    for slot in (IMAGE_SLOT, TEXT_SLOT, USER_PROMPT_SLOT):
        if slot in query:
            raise PromptError(f"slot token collision in query: {query!r}")
    skeleton = load_template("training_skeleton").body
    text = skeleton.replace(TEXT_SLOT, query).replace(USER_PROMPT_SLOT, user_suffix())
    if text.count(IMAGE_SLOT) != 1 or TEXT_SLOT in text or USER_PROMPT_SLOT in text:
        raise PromptError(f"slot token collision in query: {query!r}")
    img_start = text.index(IMAGE_SLOT)
    q_start = skeleton.index(TEXT_SLOT)
    return TrainingSequence(
        text=text,
        image_slot=(img_start, img_start + len(IMAGE_SLOT)),
        query=(q_start, q_start + len(query)),
    )


def annotation_block(record: ImageAnnotationRecord) -> str:
    """Captions/objects sections for one image, one caption per line."""
    captions = "\n".join(record.captions)
    objects = ", ".join(p.raw for p in record.objects)
    return f"Captions:\n{captions}\n\nObjects:\n{objects}"


def datagen_messages(
    record: ImageAnnotationRecord,
    examples: tuple[int, ...] = (1, 2),
) -> list[ChatMessage]:
    """Build the text-LLM conversation that generates pairs for one image.

    Layout: the datagen system prompt, then each worked example as an
    alternating user/assistant turn (per the manifest's
    ``in_context_style`` flag), then the record's captions and objects
    as the final user turn.

    Args:
        record: Validated annotations for the image.
        examples: Which worked examples to include, in order.
    """
    messages = [system_message(load_template("datagen_system").body)]
    for n in examples:
        messages.append(user_message(load_template(f"incontext_{n}_user").body))
        messages.append(assistant_message(load_template(f"incontext_{n}_assistant").body))
    messages.append(user_message(annotation_block(record)))
    return messages
