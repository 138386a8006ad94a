"""corpusforge command-line interface.

Subcommands: pseudolabel, synth-qa, assemble, stats, validate, serve.
Reports are JSON, manifests are JSON lines, and logs are line-delimited JSON
events on stderr. Outputs are written to a temporary path and atomically
renamed, so a failed run never leaves a truncated file behind.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from pathlib import Path

import click

from . import __version__
from .config import ConfigError, RunConfig, build_generator, build_registry, build_scorer, load_config
from .curriculum import StageError, assemble_stage, serialize_rendered
from .manifest import (
    DatasetManifest,
    LanguageTag,
    ManifestError,
    Stage,
    mixture_stats,
    parse_manifest,
    serialize_manifest,
    stats_rows,
)
from .pseudolabel import pseudolabel_corpus
from .qa_synth import contexts_from_jsonl, synthesize_qa_corpus
from .server import create_mock_app

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BACKEND_EXHAUSTED = 3


def log_event(event: str, **fields) -> None:
    print(json.dumps({"event": event, **fields}, ensure_ascii=False), file=sys.stderr)


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_json(path: Path, payload) -> None:
    atomic_write(path, (json.dumps(payload, ensure_ascii=False, indent=2) + "\n").encode("utf-8"))


def write_run_metadata(out: Path, config: RunConfig) -> None:
    write_json(
        Path(str(out) + ".meta.json"),
        {"seed": config.seed, "config_hash": config.config_hash, "version": __version__},
    )


def _load_run_config(ctx: click.Context, **overrides) -> RunConfig:
    opts = ctx.obj
    merged = {"seed": opts.get("seed"), "jobs": opts.get("jobs")}
    merged.update(overrides)
    return load_config(opts.get("config"), **merged)


def _read_manifest(path: str, stage: Stage, strict: bool):
    file_path = Path(path)
    if not file_path.exists():
        raise ManifestError(f"input file not found: {file_path}")
    return parse_manifest(file_path.read_bytes(), stage, strict=strict)


def _fail(message: str, code: int) -> None:
    log_event("error", message=message)
    sys.exit(code)


@click.group()
@click.version_option(__version__)
@click.option("--config", type=click.Path(), default=None, help="TOML config file.")
@click.option("--seed", type=int, default=None, help="Override the run seed.")
@click.option("--jobs", type=int, default=None, help="Worker pool size.")
@click.option("--strict/--lenient", "strict", default=True, help="Reject or preserve unknown manifest fields.")
@click.pass_context
def main(ctx: click.Context, config, seed, jobs, strict):
    """Corpus curation pipeline for multitask speech-to-text training."""
    ctx.obj = {"config": config, "seed": seed, "jobs": jobs, "strict": strict}


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--stage", type=click.Choice(["ma", "ift"]), default="ift")
@click.pass_context
def validate(ctx, input_path, stage):
    """Validate a manifest against the record schema and stage rules."""
    try:
        manifest = _read_manifest(input_path, Stage(stage.upper()), ctx.obj["strict"])
    except ManifestError as exc:
        _fail(str(exc), EXIT_VALIDATION)
    log_event("validated", input=input_path, records=len(manifest))


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--stage", type=click.Choice(["ma", "ift"]), default="ift")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def stats(ctx, input_path, stage, out_path):
    """Write the hours-per-(task, lang, corpus) mixture table as JSON."""
    try:
        config = _load_run_config(ctx)
        manifest = _read_manifest(input_path, Stage(stage.upper()), ctx.obj["strict"])
    except (ManifestError, ConfigError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    table = stats_rows(mixture_stats(manifest))
    write_json(Path(out_path), {"rows": table})
    write_run_metadata(Path(out_path), config)
    log_event("stats_written", out=out_path, groups=len(table))


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--target-lang", required=True, type=click.Choice([l.value for l in LanguageTag]))
@click.option("--threshold", type=float, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--report", "report_path", required=True, type=click.Path())
@click.pass_context
def pseudolabel(ctx, input_path, target_lang, threshold, out_path, report_path):
    """Translate an ASR manifest with all systems, oracle-filter, emit ST."""
    try:
        config = _load_run_config(ctx, st_threshold=threshold)
        manifest = _read_manifest(input_path, Stage.IFT, ctx.obj["strict"])
        registry = build_registry(config)
        scorer = build_scorer(config)
        st_manifest, report = pseudolabel_corpus(
            manifest,
            LanguageTag(target_lang),
            registry,
            scorer,
            threshold=config.st_threshold,
            jobs=config.jobs,
        )
    except (ManifestError, ConfigError, ValueError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    atomic_write(Path(out_path), serialize_manifest(st_manifest))
    write_json(Path(report_path), report.to_dict())
    write_run_metadata(Path(out_path), config)
    log_event(
        "pseudolabel_done",
        total=report.total,
        kept=report.kept,
        failed=report.failed,
    )
    if report.total > 0 and report.failed == report.total:
        _fail("all records failed: backends exhausted", EXIT_BACKEND_EXHAUSTED)


@main.command("synth-qa")
@click.option("--contexts", "contexts_path", required=True, type=click.Path())
@click.option("--langs", default="en,de,zh", show_default=True)
@click.option("--q-threshold", type=float, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--report", "report_path", required=True, type=click.Path())
@click.pass_context
def synth_qa(ctx, contexts_path, langs, q_threshold, out_path, report_path):
    """Synthesize SQA records: translated pairs plus unanswerable questions."""
    try:
        config = _load_run_config(ctx, sqa_question_threshold=q_threshold)
        contexts_file = Path(contexts_path)
        if not contexts_file.exists():
            raise ConfigError(f"contexts file not found: {contexts_file}")
        contexts = contexts_from_jsonl(contexts_file.read_bytes())
        lang_list = [LanguageTag(code.strip()) for code in langs.split(",") if code.strip()]
        records, report = synthesize_qa_corpus(
            contexts,
            lang_list,
            build_registry(config),
            build_scorer(config),
            build_generator(config),
            q_threshold=config.sqa_question_threshold,
        )
        out_manifest = DatasetManifest(records=tuple(records), stage=Stage.IFT)
    except (ManifestError, ConfigError, ValueError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    atomic_write(Path(out_path), serialize_manifest(out_manifest))
    write_json(Path(report_path), report)
    write_run_metadata(Path(out_path), config)
    log_event("synth_qa_done", records=len(records), skips=len(report["generation_skips"]))
    pair_totals = report["translated_pairs"]
    attempted = sum(sum(row.values()) for row in pair_totals.values())
    failed = sum(row["failed"] for row in pair_totals.values())
    if attempted > 0 and failed == attempted:
        _fail("all QA pair translations failed: backends exhausted", EXIT_BACKEND_EXHAUSTED)


@main.command()
@click.option("--stage", required=True, type=click.Choice(["ma", "ift"]))
@click.option("--inputs", required=True, help="Comma-separated manifest paths.")
@click.option("--hint-prob", type=float, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--stats", "stats_path", required=True, type=click.Path())
@click.pass_context
def assemble(ctx, stage, inputs, hint_prob, out_path, stats_path):
    """Merge manifests into one rendered, shuffled training stage."""
    try:
        config = _load_run_config(ctx, hint_probability=hint_prob)
        stage_enum = Stage(stage.upper())
        named = []
        for path in inputs.split(","):
            path = path.strip()
            # Parse as IFT so the stage gate (not the parser) reports offenders.
            named.append((path, _read_manifest(path, Stage.IFT, ctx.obj["strict"])))
        rendered, table = assemble_stage(
            named,
            stage_enum,
            config.hint,
            config.geometry,
            shuffle_seed=config.seed,
        )
    except (ManifestError, ConfigError, StageError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    atomic_write(Path(out_path), serialize_rendered(rendered))
    write_json(Path(stats_path), {"rows": stats_rows(table)})
    write_run_metadata(Path(out_path), config)
    log_event("assemble_done", stage=stage, examples=len(rendered))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.pass_context
def serve(ctx, host, port):
    """Run the mock backend service (POST /translate, /score, /generate)."""
    import uvicorn

    try:
        config = _load_run_config(ctx)
    except ConfigError as exc:
        _fail(str(exc), EXIT_VALIDATION)
    app = create_mock_app(seed=config.seed, systems=tuple(config.registry))
    log_event("serving", host=host, port=port, systems=list(config.registry))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
