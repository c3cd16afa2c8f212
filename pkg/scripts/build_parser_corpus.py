#!/usr/bin/env python3
"""Regenerate the frozen parser corpus from the seed answer texts.

Answer strings come from the two generation fixtures and the two worked
in-context examples. Expected phrase lists are extracted here with a
plain regex (the final bracketed group), independently of the parser
under test, then frozen into tests/data/parser_corpus.jsonl.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "tests" / "data" / "parser_corpus.jsonl"

SOURCES = [
    ("kite", ROOT / "tests" / "data" / "generations" / "kite.txt"),
    ("desk", ROOT / "tests" / "data" / "generations" / "desk.txt"),
    ("ex1", ROOT / "src" / "reasondet" / "prompts" / "assets" / "incontext_1_assistant.v1.txt"),
    ("ex2", ROOT / "src" / "reasondet" / "prompts" / "assets" / "incontext_2_assistant.v1.txt"),
]

ITEM_RE = re.compile(r"^(\d+)\s*[.)]\s*Query:", re.MULTILINE)
BRACKET_RE = re.compile(r"\[([^\][]*)\]")
DRIFT_RE = re.compile(r"Therefore the Answer: is:")


def items(text: str) -> list[tuple[str, str]]:
    """(item number, item text) for each numbered entry."""
    starts = list(ITEM_RE.finditer(text))
    out = []
    for i, m in enumerate(starts):
        end = starts[i + 1].start() if i + 1 < len(starts) else len(text)
        out.append((m.group(1), text[m.end() : end].strip()))
    return out


def main() -> None:
    cases = []
    for prefix, path in SOURCES:
        text = path.read_text("utf-8")
        for number, item in items(text):
            answer = item.split(" Answer: ", 1)[1].strip()
            brackets = BRACKET_RE.findall(answer)
            assert brackets, f"{prefix}_{number}: no bracketed list"
            expected = [p.strip() for p in brackets[-1].split(",") if p.strip()]
            cases.append(
                {
                    "id": f"{prefix}_{number}",
                    "text": answer,
                    "expected_phrases": expected,
                    "expected_tier": "T2" if DRIFT_RE.search(answer) else "T0",
                }
            )
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with OUT.open("w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case, ensure_ascii=False) + "\n")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
