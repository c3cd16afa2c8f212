"""Dataset generation: ingestion, parsing, validation, runs, file format."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from reasondet.backends.errors import BackendTimeoutError
from reasondet.backends.mocks import ReplayTextLLM, seed_complete_fixture
from reasondet.datagen import (
    GenerationPolicy,
    InvariantViolationError,
    JoinEmptyWarning,
    MalformedFileError,
    NoDescriptionError,
    NoPairsError,
    SchemaVersionMismatchError,
)
from reasondet.datagen.dataset import dataset_stats, format_stats, load_dataset, write_dataset
from reasondet.datagen.generate import generate_dataset, parse_generation, validate_pair
from reasondet.datagen.ingest import ingest_annotations
from reasondet.domain import QAPair, normalize_phrase
from reasondet.parsing import parse_answer
from reasondet.prompts import datagen_messages
from tests.conftest import CAPTIONS_FILE, DATA_DIR, INSTANCES_FILE, seed_datagen_fixtures

KITE_GENERATION = (DATA_DIR / "generations" / "kite.txt").read_text("utf-8")
DESK_GENERATION = (DATA_DIR / "generations" / "desk.txt").read_text("utf-8")


class TestIngest:
    def test_join_produces_ordered_records(self, annotation_records):
        assert [r.image.id for r in annotation_records] == ["14439", "340894"]
        kite = annotation_records[0]
        assert [p.normalized for p in kite.objects] == ["chair", "kite", "backpack", "person"]
        assert len(kite.captions) == 5
        desk = annotation_records[1]
        assert [p.normalized for p in desk.objects] == [
            "chair", "person", "tv", "cell phone", "cup", "laptop", "mouse", "keyboard",
        ]

    def test_captions_without_instances_warns_and_skips(self, tmp_path):
        captions = tmp_path / "captions.json"
        instances = tmp_path / "instances.json"
        captions.write_text(json.dumps({
            "images": [{"id": 7}],
            "annotations": [{"image_id": 7, "caption": "a lonely caption"}],
        }))
        instances.write_text(json.dumps({"annotations": [], "categories": []}))
        with pytest.warns(JoinEmptyWarning):
            records = list(ingest_annotations(captions, instances))
        assert records == []

    def test_truncated_file_reports_offset(self, tmp_path):
        captions = tmp_path / "captions.json"
        captions.write_text('{"images": [{"id": 1}], "annotations": [')
        with pytest.raises(MalformedFileError) as exc:
            list(ingest_annotations(captions, INSTANCES_FILE))
        assert exc.value.offset is not None

    def test_missing_section_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"annotations": []}))
        with pytest.raises(MalformedFileError):
            list(ingest_annotations(bad, INSTANCES_FILE))


class TestParseGeneration:
    def test_kite_block(self):
        parsed = parse_generation(KITE_GENERATION)
        assert parsed.description.startswith("The image shows a group of people")
        assert len(parsed.pairs) == 5
        assert [p.normalized for p in parsed.pairs[0].targets] == ["kite"]
        assert parsed.pairs[0].query == "I want to fly a kite. What object do I need?"
        assert parsed.pair_errors == ()

    def test_desk_block_includes_drift_pair(self):
        parsed = parse_generation(DESK_GENERATION)
        assert len(parsed.pairs) == 5
        pair2 = parsed.pairs[1]
        assert "computer monitor" in [p.normalized for p in pair2.targets]
        assert parse_answer(pair2.answer).tier == "T2"

    def test_bold_markup_and_case_tolerated(self):
        text = "**description:** A desk.\n\n**QUERY AND ANSWER:**\n1. Query: q? Answer: a. Therefore the answer is: [desk]"
        parsed = parse_generation(text)
        assert parsed.description == "A desk."
        assert len(parsed.pairs) == 1

    def test_no_description(self):
        with pytest.raises(NoDescriptionError):
            parse_generation("Query and Answer:\n1. Query: q Answer: a")

    def test_no_pairs(self):
        with pytest.raises(NoPairsError):
            parse_generation("Description:\nA scene with no pairs section.")

    def test_unparseable_item_dropped_not_fatal(self):
        text = (
            "Description:\nA scene.\n\nQuery and Answer:\n"
            "1. Query: good? Answer: yes. Therefore the answer is: [kite]\n"
            "2. Query: bad? Answer: no marker here.\n"
        )
        parsed = parse_generation(text)
        assert len(parsed.pairs) == 1
        assert len(parsed.pair_errors) == 1


class TestValidatePair:
    def _pair(self, answer: str) -> QAPair:
        return QAPair(query="q", answer=answer, targets=parse_answer(answer).phrases)

    def test_object_list_containment(self, annotation_records):
        kite_record = annotation_records[0]
        report = validate_pair(self._pair("A kite. Therefore the answer is: [kite]"), kite_record)
        assert report.accepted

    def test_caption_substring_containment(self, annotation_records):
        desk_record = annotation_records[1]
        report = validate_pair(
            self._pair("Use it. Therefore the answer is: [external keyboard]"), desk_record
        )
        assert report.accepted, [c for c in report.checks if not c.passed]

    def test_absent_object_fails_containment(self, annotation_records):
        report = validate_pair(
            self._pair("Magic. Therefore the answer is: [unicorn]"), annotation_records[0]
        )
        assert not report.accepted
        failed = {c.name for c in report.checks if not c.passed}
        assert failed == {"containment"}

    def test_tampered_targets_fail_format_check(self, annotation_records):
        pair = QAPair(
            query="q",
            answer="A kite. Therefore the answer is: [kite]",
            targets=(normalize_phrase("chair"),),
        )
        report = validate_pair(pair, annotation_records[0])
        assert "format" in {c.name for c in report.checks if not c.passed}


class TestGenerateDataset:
    def test_two_image_replay_run(self, tmp_path, replay_store, annotation_records):
        seed_datagen_fixtures(replay_store)
        llm = ReplayTextLLM(replay_store)
        run = generate_dataset(annotation_records, llm, tmp_path / "out", GenerationPolicy(run_id="r1"))
        assert run.counters["ok"] == 2
        assert run.counters["total"] == 2
        rows = list(load_dataset(run.dataset_path))
        assert len(rows) == 10
        assert {r.image_id for r in rows} == {"14439", "340894"}
        assert all(r.provenance["run_id"] == "r1" for r in rows)

    def test_resume_makes_no_new_llm_calls(self, tmp_path, replay_store, annotation_records):
        seed_datagen_fixtures(replay_store)
        llm = ReplayTextLLM(replay_store)
        out = tmp_path / "out"
        generate_dataset(annotation_records, llm, out, GenerationPolicy(run_id="r1"))
        assert llm.call_count == 2
        first = Path(out / "dataset.jsonl").read_bytes()
        generate_dataset(annotation_records, llm, out, GenerationPolicy(run_id="r1"))
        assert llm.call_count == 2  # resume contract: zero new calls
        assert Path(out / "dataset.jsonl").read_bytes() == first

    def test_parse_failure_isolated_per_image(self, tmp_path, replay_store, annotation_records):
        records = annotation_records
        seed_complete_fixture(replay_store, datagen_messages(records[0]), "garbage with no sections")
        seed_complete_fixture(
            replay_store, datagen_messages(records[1]), DESK_GENERATION
        )
        run = generate_dataset(records, ReplayTextLLM(replay_store), tmp_path / "out")
        assert run.counters["parse-failed"] == 1
        assert run.counters["ok"] == 1
        assert len(list(load_dataset(run.dataset_path))) == 5

    def test_backend_failure_recorded(self, tmp_path, annotation_records):
        class DownLLM:
            def complete_text(self, messages):
                raise BackendTimeoutError("llm down")

        run = generate_dataset(annotation_records, DownLLM(), tmp_path / "out")
        assert run.counters["backend-failed"] == 2

    def test_manifest_written(self, tmp_path, replay_store, annotation_records):
        seed_datagen_fixtures(replay_store)
        generate_dataset(annotation_records, ReplayTextLLM(replay_store), tmp_path / "out",
                         GenerationPolicy(run_id="r9"))
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["run_id"] == "r9"
        assert manifest["single_call_layout"] is True
        assert manifest["per_image"] == {"14439": "ok", "340894": "ok"}
        assert "user_suffix" in manifest["template_versions"]


class TestDatasetFile:
    def _rows(self, n: int):
        for i in range(n):
            answer = f"Scene {i}. Therefore the answer is: [kite]"
            yield str(i), {"query": f"q{i}", "answer": answer, "targets": ["kite"]}

    def test_round_trip_byte_stable(self, tmp_path):
        path = tmp_path / "data.jsonl"
        assert write_dataset(path, self._rows(10), run_id="r", template_versions={}) == 10
        rows = list(load_dataset(path))
        assert len(rows) == 10
        first = path.read_bytes()
        write_dataset(path, ((r.image_id, {"query": r.query, "answer": r.answer, "targets": list(r.targets)}) for r in rows),
                      run_id="r", template_versions={})
        assert path.read_bytes() == first

    def test_tampered_line_reports_number(self, tmp_path):
        path = tmp_path / "data.jsonl"
        write_dataset(path, self._rows(3), run_id="r", template_versions={})
        lines = path.read_text().splitlines()
        obj = json.loads(lines[2])
        obj["targets"] = ["chair"]
        lines[2] = json.dumps(obj, sort_keys=True)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(InvariantViolationError) as exc:
            list(load_dataset(path))
        assert exc.value.line_no == 3

    def test_header_required(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"image_id": "1"}\n')
        with pytest.raises(SchemaVersionMismatchError):
            list(load_dataset(path))

    def test_stats_report(self, tmp_path, replay_store, annotation_records):
        seed_datagen_fixtures(replay_store)
        run = generate_dataset(annotation_records, ReplayTextLLM(replay_store), tmp_path / "out")
        stats = dataset_stats(run.dataset_path)
        assert stats["pairs"] == 10
        assert stats["images"] == 2
        assert stats["pairs_per_image_mean"] == 5.0
        assert stats["reference_pairs_per_image"] == 6.0
        report = format_stats(stats)
        assert "5.0" in report and "6.0" in report
