#!/usr/bin/env python3
"""Generate the two-image demo dataset from committed replay fixtures."""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from reasondet.backends.mocks import ReplayTextLLM  # noqa: E402
from reasondet.backends.wire import FixtureStore  # noqa: E402
from reasondet.datagen import GenerationPolicy  # noqa: E402
from reasondet.datagen.dataset import dataset_stats, format_stats  # noqa: E402
from reasondet.datagen.generate import generate_dataset  # noqa: E402
from reasondet.datagen.ingest import ingest_annotations  # noqa: E402

OUT = ROOT / "demo-output" / "dataset"


def main() -> None:
    records = list(
        ingest_annotations(
            ROOT / "tests" / "data" / "coco" / "captions_two_images.json",
            ROOT / "tests" / "data" / "coco" / "instances_two_images.json",
        )
    )
    llm = ReplayTextLLM(FixtureStore(ROOT / "fixtures" / "replay"))
    run = generate_dataset(records, llm, OUT, GenerationPolicy(run_id="demo"))
    print(f"statuses: {run.counters}")
    print(format_stats(dataset_stats(run.dataset_path)))
    print(f"dataset at {run.dataset_path}")


if __name__ == "__main__":
    main()
