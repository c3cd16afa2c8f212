"""Answer parsing: the tolerance ladder, corpus exactness, round trips."""

from __future__ import annotations

import re
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reasondet.domain import normalize_phrase
from reasondet.parsing import (
    MARKER,
    TIERS,
    EmptyListError,
    NoMarkerError,
    ParseError,
    format_answer,
    load_corpus,
    parse_answer,
)

CORPUS_PATH = Path(__file__).parent / "data" / "parser_corpus.jsonl"
CORPUS = load_corpus(CORPUS_PATH)


class TestCorpus:
    def test_corpus_covers_all_seed_answers(self):
        # 10 from the generation fixtures, 10 + 6 from the worked examples.
        assert len(CORPUS) == 26
        assert sum(1 for c in CORPUS if c.expected_tier == "T2") == 1

    @pytest.mark.parametrize("case", CORPUS, ids=[c.id for c in CORPUS])
    def test_exact_phrase_lists(self, case):
        answer = parse_answer(case.text)
        assert [p.raw for p in answer.phrases] == list(case.expected_phrases)
        assert answer.tier == case.expected_tier


class TestLadder:
    def test_t0_exact(self):
        text = "In the image, there is a kite present, which you can use to fly a kite. Therefore the answer is: [kite]"
        answer = parse_answer(text)
        assert [p.normalized for p in answer.phrases] == ["kite"]
        assert answer.tier == "T0"
        assert answer.reasoning.endswith("fly a kite.")

    def test_t1_case_and_brackets(self):
        answer = parse_answer("some text < therefore the answer is: [kite, chair] >")
        assert answer.tier == "T1"
        assert [p.normalized for p in answer.phrases] == ["kite", "chair"]

    def test_t1_flexible_whitespace(self):
        answer = parse_answer("thinking... Therefore  the\tanswer is : [mug]")
        assert answer.tier == "T1"
        assert [p.normalized for p in answer.phrases] == ["mug"]

    def test_t2_drift_variant(self):
        text = (
            "In the image, there are keyboard, laptop, mouse, computer monitor, cell phone, and TV. "
            "All of these are electronic devices. "
            "Therefore the Answer: is: [keyboard, laptop, mouse, computer monitor, cell phone, TV]"
        )
        answer = parse_answer(text)
        assert answer.tier == "T2"
        assert len(answer.phrases) == 6

    def test_t3_last_resort(self):
        answer = parse_answer("I think the answer is: [spoon].")
        assert answer.tier == "T3"
        assert [p.normalized for p in answer.phrases] == ["spoon"]

    def test_no_marker(self):
        with pytest.raises(NoMarkerError) as exc:
            parse_answer("I could not find anything relevant.")
        assert "T0" in str(exc.value) and "T3" in str(exc.value)

    def test_ladder_ceiling_cuts_lower_tiers(self):
        with pytest.raises(NoMarkerError) as exc:
            parse_answer("I think the answer is: [spoon].", max_tier="T1")
        assert "T2" not in str(exc.value)

    def test_unknown_ceiling_rejected(self):
        with pytest.raises(ParseError):
            parse_answer("x", max_tier="T9")

    # Oracle for last-marker-wins: enumerate every exact-marker position
    # and assert the parser's list equals what follows the final one.
    def test_last_marker_wins(self):
        text = (
            "Therefore the answer is: [tennis racket, tennis ball] was my first thought, "
            "but on reflection. Therefore the answer is: [water bottle]"
        )
        positions = [m.start() for m in re.finditer(re.escape(MARKER), text)]
        assert len(positions) == 2
        tail = text[positions[-1] + len(MARKER) :]
        expected = [s.strip() for s in tail[tail.index("[") + 1 : tail.index("]")].split(",")]
        answer = parse_answer(text)
        assert [p.raw for p in answer.phrases] == expected == ["water bottle"]


class TestListExtraction:
    def test_bracketless_list_up_to_sentence_end(self):
        answer = parse_answer("Therefore the answer is: kite, chair and backpack. Enjoy!")
        assert [p.normalized for p in answer.phrases] == ["kite", "chair", "backpack"]

    def test_and_split_only_in_final_item(self):
        answer = parse_answer("Therefore the answer is: [salt and pepper shaker, cup and saucer]")
        assert [p.normalized for p in answer.phrases] == ["salt and pepper shaker", "cup", "saucer"]

    def test_deduplication_first_occurrence_wins(self):
        answer = parse_answer("Therefore the answer is: [Kite, chair, kite]")
        assert [p.raw for p in answer.phrases] == ["Kite", "chair"]

    def test_negations_dropped(self):
        answer = parse_answer("Therefore the answer is: [kite, none]")
        assert [p.normalized for p in answer.phrases] == ["kite"]

    def test_all_negations_is_empty_list(self):
        with pytest.raises(EmptyListError) as exc:
            parse_answer("Therefore the answer is: [no, none]")
        assert exc.value.tier == "T0"

    def test_empty_brackets(self):
        with pytest.raises(EmptyListError):
            parse_answer("Therefore the answer is: []")


class TestFormatAnswer:
    def test_direct_construction(self):
        phrases = [normalize_phrase("fridge")]
        assert format_answer("There is a fridge.", phrases) == "There is a fridge. Therefore the answer is: [fridge]"

    def test_empty_reasoning_allowed(self):
        assert format_answer("", [normalize_phrase("kite")]) == " Therefore the answer is: [kite]"

    def test_empty_phrases_rejected(self):
        with pytest.raises(ParseError):
            format_answer("reasoning", [])

    def test_round_trip_example(self):
        phrases = [normalize_phrase("kite"), normalize_phrase("chair")]
        answer = parse_answer(format_answer("Both are visible.", phrases))
        assert list(answer.phrases) == phrases
        assert answer.tier == "T0"


_word = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=8)
_phrase_text = st.builds(lambda ws: " ".join(ws), st.lists(_word, min_size=1, max_size=3))


def _phrase_list_strategy():
    return st.lists(_phrase_text, min_size=1, max_size=6).map(
        lambda texts: _dedupe_valid(texts)
    ).filter(lambda ps: len(ps) > 0)


def _dedupe_valid(texts):
    phrases, seen = [], set()
    for t in texts:
        try:
            p = normalize_phrase(t)
        except Exception:
            continue
        if p.normalized in seen or p.normalized in ("no", "none", "nothing"):
            continue
        if " and " in p.normalized:
            continue
        seen.add(p.normalized)
        # The round-trip law is over normalized lists (raw == normalized).
        phrases.append(normalize_phrase(p.normalized))
    return phrases


_reasoning = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyz ,.!?", max_size=80
).filter(lambda s: "answer is" not in s.lower() and "answer:" not in s.lower())


class TestRoundTripProperty:
    @given(_reasoning, _phrase_list_strategy())
    def test_parse_of_format_is_identity(self, reasoning, phrases):
        answer = parse_answer(format_answer(reasoning, phrases))
        assert list(answer.phrases) == phrases
        assert answer.tier == "T0"

    @given(_reasoning, _phrase_list_strategy())
    def test_monotone_tolerance(self, reasoning, phrases):
        text = format_answer(reasoning, phrases)
        full = parse_answer(text)
        truncated = parse_answer(text, max_tier=full.tier)
        assert truncated.phrases == full.phrases
        assert truncated.tier == full.tier


class TestCorpusLoader:
    def test_bad_line_reports_position(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = '{"id": "a", "text": "t", "expected_phrases": ["t"], "expected_tier": "T0"}'
        path.write_text(f"{good}\nnot json\n", "utf-8")
        with pytest.raises(ParseError) as exc:
            load_corpus(path)
        assert ":2:" in str(exc.value)
