"""Shared fixtures: paths, replay-store seeding, hypothesis profile."""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from reasondet.backends.mocks import seed_complete_fixture, seed_detect_fixture, seed_reason_fixture
from reasondet.backends.wire import FixtureStore
from reasondet.datagen.ingest import ingest_annotations
from reasondet.domain import BoundingBox, DetectionRecord, ImageRef, normalize_phrase
from reasondet.prompts import datagen_messages, inference_system_prompt, system_message, user_message, user_turn

settings.register_profile(
    "default", max_examples=100, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

DATA_DIR = Path(__file__).parent / "data"
CAPTIONS_FILE = DATA_DIR / "coco" / "captions_two_images.json"
INSTANCES_FILE = DATA_DIR / "coco" / "instances_two_images.json"

BEVERAGE_QUERY = "I want to have a cold beverage"
BEVERAGE_ANSWER = (
    "Step-1. The image shows a kitchen with wooden cabinets, a counter with a sink, "
    "a stove, and a large refrigerator standing next to the counter. "
    "Step-2. The user wants a cold beverage. No beverage is visible on the counter or "
    "the stove, but refrigerators commonly store chilled drinks, so the refrigerator "
    "is the object that can fulfill the request. "
    "Step-3. Therefore the answer is: [refrigerator]"
)
FRIDGE_BOX = BoundingBox(cx=0.62, cy=0.55, w=0.28, h=0.62)


def detection_messages(query: str, image: ImageRef):
    """The exact message list run_detection builds."""
    return [system_message(inference_system_prompt()), user_message(user_turn(query), image=image)]


def seed_beverage_scenario(store: FixtureStore, image_id: str = "kitchen.png") -> ImageRef:
    """Record the fridge scenario: one reasoner answer, one detection."""
    image = ImageRef(id=image_id, source=image_id)
    seed_reason_fixture(store, image, detection_messages(BEVERAGE_QUERY, image), BEVERAGE_ANSWER)
    fridge = normalize_phrase("refrigerator")
    seed_detect_fixture(
        store,
        image,
        [fridge],
        0.35,
        [DetectionRecord(phrase=fridge, box=FRIDGE_BOX, score=0.92)],
    )
    return image


def seed_datagen_fixtures(store: FixtureStore) -> list:
    """Record the scripted generation for both annotation-fixture images."""
    records = list(ingest_annotations(CAPTIONS_FILE, INSTANCES_FILE))
    generations = {
        "14439": (DATA_DIR / "generations" / "kite.txt").read_text("utf-8"),
        "340894": (DATA_DIR / "generations" / "desk.txt").read_text("utf-8"),
    }
    for record in records:
        seed_complete_fixture(store, datagen_messages(record), generations[record.image.id])
    return records


def make_png(width: int, height: int, color: tuple[int, int, int] = (200, 200, 200)) -> bytes:
    """A small valid RGB PNG, for upload and dimension-sniffing tests."""

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + tag
            + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
        )

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    row = b"\x00" + bytes(color) * width
    idat = zlib.compress(row * height, level=9)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", idat) + chunk(b"IEND", b"")


@pytest.fixture
def replay_store(tmp_path) -> FixtureStore:
    return FixtureStore(tmp_path / "fixtures")


@pytest.fixture
def beverage_image(replay_store) -> ImageRef:
    return seed_beverage_scenario(replay_store)


@pytest.fixture
def annotation_records():
    return list(ingest_annotations(CAPTIONS_FILE, INSTANCES_FILE))
