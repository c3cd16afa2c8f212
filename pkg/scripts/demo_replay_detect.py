#!/usr/bin/env python3
"""Run every committed replay scenario end to end and print a summary.

Requires fixtures/ (see build_replay_fixtures.py). No network, no
models: the reasoner and detector answer from recorded fixtures.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from reasondet.backends.errors import BackendError  # noqa: E402
from reasondet.backends.mocks import ReplayDetector, ReplayReasoner  # noqa: E402
from reasondet.backends.wire import FixtureStore  # noqa: E402
from reasondet.domain import ImageRef  # noqa: E402
from reasondet.overlay import render_overlay  # noqa: E402
from reasondet.pipeline import PipelineConfig, run_detection  # noqa: E402

FIXTURES = ROOT / "fixtures"
OUT = ROOT / "demo-output"


def main() -> None:
    scenarios = json.loads((FIXTURES / "scenarios.json").read_text())["scenarios"]
    store = FixtureStore(FIXTURES / "replay")
    reasoner, detector = ReplayReasoner(store), ReplayDetector(store)
    OUT.mkdir(exist_ok=True)

    for scenario in scenarios:
        image = ImageRef(id=scenario["image"], source=scenario["image"], width_px=640, height_px=480)
        try:
            result = run_detection(image, scenario["query"], PipelineConfig(), reasoner, detector)
        except BackendError as e:
            print(f"{scenario['name']:>20}: backend error: {e}")
            continue
        svg, _ = render_overlay(result, 640, 480)
        (OUT / f"{scenario['name']}.svg").write_text(svg + "\n")
        failure = result.failure.kind.value if result.failure else "-"
        phrases = ", ".join(p.normalized for p in result.answer.phrases) or "-"
        print(
            f"{scenario['name']:>20}: {len(result.detections)} boxes "
            f"(expected {scenario['detections_default']}), phrases [{phrases}], failure {failure}"
        )
    print(f"\noverlays written to {OUT}")


if __name__ == "__main__":
    main()
