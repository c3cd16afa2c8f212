"""COCO-style annotation ingestion.

Only a small slice of the format is consumed:

* captions file: ``images[].id`` (+ optional ``file_name``, ``width``,
  ``height``) and ``annotations[].{image_id, caption}``;
* instances file: ``annotations[].{image_id, category_id}`` and
  ``categories[].{id, name}``.

Records come out in the captions file's image order, with object names
deduplicated by normalized form in first-seen annotation order.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path
from typing import Iterator

from ..domain import DomainError, ImageAnnotationRecord, ImageRef, dedupe_phrases, normalize_phrase
from . import JoinEmptyWarning, MalformedFileError


def _load_json(path: str | Path) -> dict:
    text = Path(path).read_text("utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedFileError(str(path), e.msg, offset=e.pos) from e
    if not isinstance(obj, dict):
        raise MalformedFileError(str(path), f"expected a JSON object, got {type(obj).__name__}")
    return obj


def _require(obj: dict, key: str, path: str) -> list:
    value = obj.get(key)
    if not isinstance(value, list):
        raise MalformedFileError(path, f"missing or non-list {key!r} section")
    return value


def ingest_annotations(captions_file: str | Path, instances_file: str | Path) -> Iterator[ImageAnnotationRecord]:
    """Join caption and instance annotations into per-image records.

    Images with captions but no objects are skipped with a
    :class:`JoinEmptyWarning`; images with neither are skipped silently.

    Raises:
        MalformedFileError: unreadable JSON (with byte offset) or a
            missing required section.
    """
    captions_doc = _load_json(captions_file)
    instances_doc = _load_json(instances_file)

    images = _require(captions_doc, "images", str(captions_file))
    caption_anns = _require(captions_doc, "annotations", str(captions_file))
    instance_anns = _require(instances_doc, "annotations", str(instances_file))
    categories = _require(instances_doc, "categories", str(instances_file))

    try:
        category_names = {c["id"]: str(c["name"]) for c in categories}
    except (KeyError, TypeError) as e:
        raise MalformedFileError(str(instances_file), f"bad categories entry: {e!r}") from e

    captions_by_image: dict[object, list[str]] = {}
    for ann in caption_anns:
        try:
            captions_by_image.setdefault(ann["image_id"], []).append(str(ann["caption"]))
        except (KeyError, TypeError) as e:
            raise MalformedFileError(str(captions_file), f"bad caption annotation: {e!r}") from e

    objects_by_image: dict[object, list[str]] = {}
    for ann in instance_anns:
        try:
            name = category_names.get(ann["category_id"])
        except (KeyError, TypeError) as e:
            raise MalformedFileError(str(instances_file), f"bad instance annotation: {e!r}") from e
        if name is not None:
            objects_by_image.setdefault(ann["image_id"], []).append(name)

    for entry in images:
        try:
            image_id = entry["id"]
        except (KeyError, TypeError) as e:
            raise MalformedFileError(str(captions_file), f"bad images entry: {e!r}") from e
        captions = captions_by_image.get(image_id, [])
        if not captions:
            continue
        names = objects_by_image.get(image_id, [])
        phrases = []
        for name in names:
            try:
                phrases.append(normalize_phrase(name))
            except DomainError:
                continue
        phrases = dedupe_phrases(phrases)
        if not phrases:
            warnings.warn(
                f"image {image_id} has captions but no objects; skipped",
                JoinEmptyWarning,
                stacklevel=2,
            )
            continue
        yield ImageAnnotationRecord(
            image=ImageRef(
                id=str(image_id),
                source=str(entry.get("file_name", "")),
                width_px=entry.get("width"),
                height_px=entry.get("height"),
            ),
            captions=tuple(captions),
            objects=tuple(phrases),
        )
