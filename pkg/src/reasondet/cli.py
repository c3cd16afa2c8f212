"""Command-line interface.

Every command exits 0 on success and nonzero with a structured JSON
diagnostic on stderr otherwise (usage errors exit 2, handled by click).
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .backends import DEFAULT_BOX_THRESHOLD
from .backends.errors import BackendError
from .backends.mocks import ReplayDetector, ReplayReasoner, ReplayTextLLM
from .backends.wire import FixtureStore
from .config import ConfigError, ServiceConfig, build_backends, load_config
from .datagen import DatagenError, GenerationPolicy
from .datagen.dataset import dataset_stats, format_stats, load_dataset
from .datagen.generate import generate_dataset
from .datagen.ingest import ingest_annotations
from .domain import ImageRef
from .imagemeta import sniff_dimensions
from .overlay import render_overlay
from .parsing import ParseError, parse_answer
from .pipeline import PipelineConfig, run_detection, result_to_json_dict


def _fail(code: str, detail: str, stage: str = "cli", exit_code: int = 1) -> None:
    click.echo(json.dumps({"code": code, "stage": stage, "detail": detail}), err=True)
    sys.exit(exit_code)


def _detection_backends(replay: str | None, config_path: str | None):
    if replay:
        store = FixtureStore(replay)
        return ReplayReasoner(store), ReplayDetector(store), None
    if config_path:
        return build_backends(load_config(config_path))
    _fail("usage", "provide --replay FIXTURES_DIR or --config FILE", exit_code=2)


@click.group()
def main() -> None:
    """Instruction-driven object detection tools."""


@main.command()
@click.argument("image_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--query", required=True, help="Natural-language instruction.")
@click.option("--threshold", type=float, default=None, help="Detection score floor in (0,1).")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write result JSON here.")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="Write an SVG overlay here.")
@click.option("--replay", type=click.Path(exists=True, file_okay=False), default=None,
              help="Fixture directory; answers come from recorded responses.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def detect(image_path, query, threshold, out, svg, replay, config_path) -> None:
    """Run one detection query against an image."""
    if not query.strip():
        _fail("validation", "query must be non-empty")
    reasoner, detector, _ = _detection_backends(replay, config_path)
    path = Path(image_path)
    dims = sniff_dimensions(path.read_bytes())
    image = ImageRef(
        id=path.name,
        source=str(path),
        width_px=dims[0] if dims else None,
        height_px=dims[1] if dims else None,
    )
    pipeline_config = PipelineConfig()
    if threshold is not None:
        if not (0.0 < threshold < 1.0):
            _fail("validation", f"threshold must be in (0,1), got {threshold}")
        pipeline_config = dataclasses.replace(pipeline_config, box_threshold=threshold)
    try:
        result = run_detection(image, query.strip(), pipeline_config, reasoner, detector)
    except BackendError as e:
        _fail("backend", str(e), stage=e.stage or "backend")
    doc = result_to_json_dict(result, include_raw_answer=pipeline_config.include_raw_answer)
    rendered = json.dumps(doc, indent=2, ensure_ascii=False)
    if out:
        Path(out).write_text(rendered + "\n", "utf-8")
    else:
        click.echo(rendered)
    if svg:
        if not (image.width_px and image.height_px):
            _fail("validation", "cannot render SVG: image dimensions unknown")
        svg_doc, sidecar = render_overlay(result, image.width_px, image.height_px)
        Path(svg).write_text(svg_doc + "\n", "utf-8")
        Path(svg).with_suffix(".boxes.json").write_text(
            json.dumps(sidecar, indent=2, ensure_ascii=False) + "\n", "utf-8"
        )
    if result.failure is not None:
        click.echo(f"failure: {result.failure.kind.value} ({result.failure.detail})", err=True)


@main.command()
@click.option("--captions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--instances", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--replay", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--run-id", default="run", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
def datagen(captions, instances, out_dir, replay, config_path, run_id, workers) -> None:
    """Generate an instruction dataset from caption/instance annotations."""
    if replay:
        llm = ReplayTextLLM(FixtureStore(replay))
    elif config_path:
        _, _, llm = build_backends(load_config(config_path))
        if llm is None:
            _fail("validation", "config has no text_llm backend")
    else:
        _fail("usage", "provide --replay FIXTURES_DIR or --config FILE", exit_code=2)
    try:
        records = list(ingest_annotations(captions, instances))
        run = generate_dataset(records, llm, out_dir, GenerationPolicy(run_id=run_id, workers=workers))
    except DatagenError as e:
        _fail("datagen", str(e), stage="datagen")
    except BackendError as e:
        _fail("backend", str(e), stage="complete_text")
    stats = dataset_stats(run.dataset_path)
    click.echo(format_stats(stats))
    counters = run.counters
    click.echo(f"images ok: {counters['ok']}/{counters['total']}")
    if counters["total"] != counters["ok"]:
        sys.exit(1)


@main.command("validate-dataset")
@click.argument("dataset_file", type=click.Path(exists=True, dir_okay=False))
def validate_dataset(dataset_file) -> None:
    """Re-check every line's stored targets against its answer text."""
    try:
        n = sum(1 for _ in load_dataset(dataset_file))
    except DatagenError as e:
        _fail("invalid_dataset", str(e), stage="validate")
    click.echo(f"ok: {n} pairs")


@main.command("parse-answer")
@click.argument("source")
@click.option("--full", is_flag=True, help="Print the whole parse, not just the phrases.")
def parse_answer_cmd(source, full) -> None:
    """Parse an answer given as literal text, a file path, or - for stdin."""
    if source == "-":
        text = sys.stdin.read()
    elif Path(source).is_file():
        text = Path(source).read_text("utf-8")
    else:
        text = source
    try:
        answer = parse_answer(text)
    except ParseError as e:
        _fail("parse", str(e), stage="parse")
    if full:
        doc = {
            "reasoning": answer.reasoning,
            "phrases": [p.normalized for p in answer.phrases],
            "tier": answer.tier,
        }
        click.echo(json.dumps(doc, indent=2, ensure_ascii=False))
    else:
        click.echo(json.dumps([p.normalized for p in answer.phrases], ensure_ascii=False))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
def serve(config_path) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        config = load_config(config_path)
        app = create_app(config)
    except (ConfigError, ValueError) as e:
        _fail("config", str(e), stage="startup")
    uvicorn.run(app, host=config.listen.host, port=config.listen.port, log_level="info")


if __name__ == "__main__":
    main()
