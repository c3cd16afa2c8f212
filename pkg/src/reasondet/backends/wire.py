"""Wire encoding, request digests and the content-addressed fixture store.

Three JSON protocols live here:

* chat completion: ``{"messages": [{"role", "content": [part, ...]}]}``
  where a part is ``{"type": "text", "text": str}`` or
  ``{"type": "image", "url": str}`` / ``{"type": "image", "b64": str}``;
  the response envelope is ``{"choices": [{"message": {"content": str}}]}``.
* detection: ``{"image": {...}, "phrases": [str], "box_threshold": float}``
  answered by ``{"detections": [{"phrase", "box": {cx, cy, w, h}, "score"}]}``.
* fixtures: one ``<sha256(request)>.json`` file per recorded exchange,
  holding ``{"request": ..., "response": ...}``.

Digests are computed over canonical JSON (sorted keys, no whitespace),
so identical requests always address the same fixture file.
"""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path
from typing import Any, Sequence

from ..domain import BoundingBox, DetectionRecord, DomainError, ImageRef, ObjectPhrase
from ..prompts import ChatMessage, ImagePart, TextPart
from .errors import ProtocolError


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest_of(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def encode_image_part(image: ImageRef, modes: Sequence[str] = ("url", "b64")) -> dict:
    """Encode an image for transport, preferring URL delivery when allowed."""
    src = image.source
    if src.startswith(("http://", "https://")) and "url" in modes:
        return {"type": "image", "url": src}
    if "b64" not in modes:
        raise ProtocolError(f"backend accepts only {modes}, cannot send image {image.id!r}")
    path = Path(src) if src else None
    if path is not None and path.is_file():
        payload = base64.b64encode(path.read_bytes()).decode("ascii")
    else:
        # Treat a non-file source as an inline payload supplied upstream.
        payload = src
    return {"type": "image", "b64": payload}


def encode_messages(messages: Sequence[ChatMessage], modes: Sequence[str] = ("url", "b64")) -> list[dict]:
    encoded = []
    for m in messages:
        content: list[dict] = []
        for part in m.parts:
            if isinstance(part, TextPart):
                content.append({"type": "text", "text": part.text})
            elif isinstance(part, ImagePart):
                content.append(encode_image_part(part.image, modes))
        encoded.append({"role": m.role, "content": content})
    return encoded


def decode_completion(body: Any) -> str:
    """Pull the assistant text out of a chat-completion envelope."""
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as e:
        raise ProtocolError(f"malformed completion envelope: {e!r}") from e
    if not isinstance(content, str):
        raise ProtocolError(f"completion content is not text: {type(content).__name__}")
    return content


def encode_detection_request(image: ImageRef, phrases: Sequence[ObjectPhrase], threshold: float) -> dict:
    return {
        "image": {"id": image.id, "source": image.source},
        "phrases": [p.normalized for p in phrases],
        "box_threshold": threshold,
    }


def decode_detections(body: Any) -> list[tuple[str, BoundingBox, float]]:
    """Decode the detection envelope into (phrase, box, score) triples."""
    try:
        raw = body["detections"]
    except (KeyError, TypeError) as e:
        raise ProtocolError(f"malformed detection envelope: {e!r}") from e
    out = []
    for i, det in enumerate(raw):
        try:
            b = det["box"]
            box = BoundingBox(cx=float(b["cx"]), cy=float(b["cy"]), w=float(b["w"]), h=float(b["h"]))
            out.append((str(det["phrase"]), box, float(det["score"])))
        except (KeyError, TypeError, ValueError, DomainError) as e:
            raise ProtocolError(f"malformed detection #{i}: {e!r}") from e
    return out


def detection_to_wire(record: DetectionRecord) -> dict:
    return {
        "phrase": record.phrase.normalized,
        "box": {"cx": record.box.cx, "cy": record.box.cy, "w": record.box.w, "h": record.box.h},
        "score": record.score,
    }


# Digest helpers. Only stable request identity goes in: the image id
# rather than its bytes, normalized phrases rather than raw ones.


def _message_fingerprint(messages: Sequence[ChatMessage]) -> list[dict]:
    out = []
    for m in messages:
        parts: list[dict] = []
        for part in m.parts:
            if isinstance(part, TextPart):
                parts.append({"text": part.text})
            elif isinstance(part, ImagePart):
                parts.append({"image": part.image.id})
        out.append({"role": m.role, "parts": parts})
    return out


def reason_digest(image: ImageRef, messages: Sequence[ChatMessage]) -> str:
    return digest_of({"kind": "reason", "image": image.id, "messages": _message_fingerprint(messages)})


def detect_digest(image: ImageRef, phrases: Sequence[ObjectPhrase], threshold: float) -> str:
    return digest_of(
        {
            "kind": "detect",
            "image": image.id,
            "phrases": [p.normalized for p in phrases],
            "box_threshold": threshold,
        }
    )


def complete_digest(messages: Sequence[ChatMessage]) -> str:
    return digest_of({"kind": "complete", "messages": _message_fingerprint(messages)})


class FixtureStore:
    """Content-addressed directory of request-digest -> response files."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def get(self, digest: str) -> dict | None:
        path = self.path_for(digest)
        if not path.is_file():
            return None
        return json.loads(path.read_text("utf-8"))

    def put(self, digest: str, request: Any, response: Any) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(digest)
        path.write_text(
            json.dumps({"request": request, "response": response}, indent=2, ensure_ascii=False) + "\n",
            "utf-8",
        )
        return path
