#!/usr/bin/env python3
"""Build the committed replay fixtures under fixtures/.

Outputs:
  fixtures/replay/            request-digest -> response files
  fixtures/images/            small PNGs the scenarios reference
  fixtures/scenarios.json     scenario manifest for end-to-end UI tests
  fixtures/server.replay.json service config for `reasondet serve`
  fixtures/golden_result.json golden detect output for the kitchen scenario

Everything is deterministic; rerunning reproduces identical files.
"""

from __future__ import annotations

import json
import struct
import sys
import zlib
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from reasondet.backends.mocks import (  # noqa: E402
    ReplayDetector,
    ReplayReasoner,
    seed_complete_fixture,
    seed_detect_fixture,
    seed_reason_fixture,
)
from reasondet.backends.wire import FixtureStore  # noqa: E402
from reasondet.datagen.ingest import ingest_annotations  # noqa: E402
from reasondet.domain import BoundingBox, DetectionRecord, ImageRef, normalize_phrase  # noqa: E402
from reasondet.parsing import format_answer  # noqa: E402
from reasondet.pipeline import PipelineConfig, result_to_json_dict, run_detection  # noqa: E402
from reasondet.prompts import datagen_messages, inference_system_prompt, system_message, user_message, user_turn  # noqa: E402

FIXTURES = ROOT / "fixtures"

BEVERAGE_QUERY = "I want to have a cold beverage"
BEVERAGE_ANSWER = (
    "Step-1. The image shows a kitchen with wooden cabinets, a counter with a sink, "
    "a stove, and a large refrigerator standing next to the counter. "
    "Step-2. The user wants a cold beverage. No beverage is visible on the counter or "
    "the stove, but refrigerators commonly store chilled drinks, so the refrigerator "
    "is the object that can fulfill the request. "
    "Step-3. Therefore the answer is: [refrigerator]"
)

# name, image file, query, reasoner answer, {phrase: [(box, score), ...]}
SCENARIOS = [
    {
        "name": "kitchen-beverage",
        "image": "kitchen.png",
        "query": BEVERAGE_QUERY,
        "answer": BEVERAGE_ANSWER,
        "detections": {"refrigerator": [((0.62, 0.55, 0.28, 0.62), 0.92)]},
    },
    {
        "name": "field-kite",
        "image": "field.png",
        "query": "I want to fly a kite. What object do I need?",
        "answer": format_answer(
            "Step-1. A grassy field under an open sky. Step-2. A kite is the object needed. Step-3.",
            [normalize_phrase("kite")],
        ),
        "detections": {"kite": [((0.3, 0.25, 0.2, 0.15), 0.88), ((0.7, 0.3, 0.15, 0.12), 0.55)]},
    },
    {
        "name": "field-people",
        "image": "field.png",
        "query": "Find all the people in the image.",
        "answer": format_answer(
            "Step-1. Several people stand on the grass. Step-2. Every person matches. Step-3.",
            [normalize_phrase("person")],
        ),
        "detections": {
            "person": [((0.2, 0.6, 0.12, 0.35), 0.9), ((0.45, 0.62, 0.1, 0.3), 0.75), ((0.8, 0.58, 0.11, 0.33), 0.42)]
        },
    },
    {
        "name": "desk-phone",
        "image": "desk.png",
        "query": "How can I make a phone call?",
        "answer": format_answer(
            "Step-1. A desk with devices. Step-2. The cell phone makes calls. Step-3.",
            [normalize_phrase("cell phone")],
        ),
        "detections": {"cell phone": [((0.55, 0.7, 0.08, 0.1), 0.81)]},
    },
    {
        "name": "desk-electronics",
        "image": "desk.png",
        "query": "Find all the electronic devices in the image.",
        "answer": format_answer(
            "Step-1. A desk full of devices. Step-2. All listed devices are electronic. Step-3.",
            [normalize_phrase(n) for n in ["keyboard", "laptop", "mouse", "computer monitor", "cell phone", "TV"]],
        ),
        "detections": {
            "keyboard": [((0.4, 0.75, 0.25, 0.1), 0.72)],
            "laptop": [((0.25, 0.5, 0.2, 0.25), 0.9)],
            "mouse": [((0.6, 0.78, 0.06, 0.06), 0.5)],
            "computer monitor": [((0.75, 0.4, 0.22, 0.3), 0.66)],
            "cell phone": [((0.55, 0.7, 0.08, 0.1), 0.81)],
            "tv": [((0.08, 0.3, 0.14, 0.2), 0.38)],
        },
    },
    {
        "name": "park-toy-plane",
        "image": "park.png",
        "query": "Find the toy planes.",
        "answer": format_answer(
            "Step-1. A park scene. Step-2. Several toy planes rest on the bench. Step-3.",
            [normalize_phrase("toy plane")],
        ),
        "detections": {"toy plane": []},
    },
    {
        "name": "street-no-marker",
        "image": "street.png",
        "query": "What here is dangerous?",
        "answer": "The street looks calm; nothing noteworthy stands out to report.",
        "detections": None,
    },
    {
        "name": "tennis-forehand",
        "image": "tennis.png",
        "query": "I want to practice my forehand. What object can I use?",
        "answer": format_answer(
            "Step-1. A tennis court. Step-2. Racket and ball serve practice. Step-3.",
            [normalize_phrase("tennis racket"), normalize_phrase("tennis ball")],
        ),
        "detections": {
            "tennis racket": [((0.55, 0.6, 0.12, 0.2), 0.85)],
            "tennis ball": [((0.4, 0.3, 0.04, 0.05), 0.45)],
        },
    },
    {
        "name": "library-book",
        "image": "library.png",
        "query": "It is late, and I wish to read before going to bed.",
        "answer": format_answer(
            "Step-1. Shelves of books. Step-2. Any book supports reading. Step-3.",
            [normalize_phrase("book")],
        ),
        "detections": {
            "book": [
                ((0.15, 0.4, 0.08, 0.2), 0.95),
                ((0.35, 0.42, 0.08, 0.2), 0.8),
                ((0.55, 0.38, 0.08, 0.2), 0.6),
                ((0.75, 0.41, 0.08, 0.2), 0.4),
            ]
        },
    },
    {
        "name": "garden-watering",
        "image": "garden.png",
        "query": "Find the objects used for watering plants.",
        "answer": format_answer(
            "Step-1. A garden bed. Step-2. The watering can and hose water plants. Step-3.",
            [normalize_phrase("watering can"), normalize_phrase("hose")],
        ),
        "detections": {
            "watering can": [((0.3, 0.7, 0.12, 0.15), 0.55)],
            "hose": [((0.65, 0.8, 0.2, 0.08), 0.36)],
        },
    },
]

HI_THRESHOLD = 0.7
PALETTE = [(200, 200, 200), (180, 210, 180), (180, 180, 220), (220, 200, 180)]


def make_png(width: int, height: int, color=(200, 200, 200)) -> bytes:
    def chunk(tag: bytes, data: bytes) -> bytes:
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    row = b"\x00" + bytes(color) * width
    idat = zlib.compress(row * height, level=9)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", idat) + chunk(b"IEND", b"")


def detection_messages(query: str, image: ImageRef):
    return [system_message(inference_system_prompt()), user_message(user_turn(query), image=image)]


def build() -> None:
    store = FixtureStore(FIXTURES / "replay")
    images_dir = FIXTURES / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    manifest = []
    for i, scenario in enumerate(SCENARIOS):
        image = ImageRef(id=scenario["image"], source=scenario["image"])
        png_path = images_dir / scenario["image"]
        if not png_path.exists():
            png_path.write_bytes(make_png(640, 480, PALETTE[i % len(PALETTE)]))
        seed_reason_fixture(store, image, detection_messages(scenario["query"], image), scenario["answer"])
        n_default = n_hi = 0
        if scenario["detections"] is not None:
            phrases = [normalize_phrase(p) for p in scenario["detections"]]
            records = []
            for phrase in phrases:
                for (cx, cy, w, h), score in scenario["detections"][phrase.normalized]:
                    records.append(
                        DetectionRecord(phrase=phrase, box=BoundingBox(cx, cy, w, h), score=score)
                    )
            seed_detect_fixture(store, image, phrases, 0.35, records)
            n_default = sum(1 for r in records if r.score >= 0.35)
            n_hi = sum(1 for r in records if r.score >= HI_THRESHOLD)
        manifest.append(
            {
                "name": scenario["name"],
                "image": scenario["image"],
                "query": scenario["query"],
                "detections_default": n_default,
                "detections_hi": n_hi,
                "hi_threshold": HI_THRESHOLD,
            }
        )

    (FIXTURES / "scenarios.json").write_text(json.dumps({"scenarios": manifest}, indent=2) + "\n")

    # Datagen fixtures for the two annotation-fixture images.
    for record in ingest_annotations(
        ROOT / "tests" / "data" / "coco" / "captions_two_images.json",
        ROOT / "tests" / "data" / "coco" / "instances_two_images.json",
    ):
        generation = (ROOT / "tests" / "data" / "generations" / {
            "14439": "kite.txt", "340894": "desk.txt",
        }[record.image.id]).read_text("utf-8")
        seed_complete_fixture(store, datagen_messages(record), generation)

    (FIXTURES / "server.replay.json").write_text(
        json.dumps(
            {
                "listen": {"host": "127.0.0.1", "port": 8008},
                "replay": True,
                "fixtures_dir": str((FIXTURES / "replay").relative_to(ROOT)),
                "datagen_dir": "datagen-runs",
                "pipeline": {"box_threshold": 0.35},
            },
            indent=2,
        )
        + "\n"
    )

    # Golden detect output: produced by the replay run itself, then frozen.
    kitchen = ImageRef(id="kitchen.png", source="kitchen.png", width_px=640, height_px=480)
    result = run_detection(
        kitchen, BEVERAGE_QUERY, PipelineConfig(), ReplayReasoner(store), ReplayDetector(store)
    )
    doc = result_to_json_dict(result)
    doc.pop("timings_ms")
    assert [d["phrase"] for d in doc["detections"]] == ["refrigerator"]
    (FIXTURES / "golden_result.json").write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")

    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    build()
