"""Two-stage training set assembly and input-template rendering.

Each record is rendered into the model's text prefix: language tag, task tag,
an optional length hint drawn with fixed probability, and (for SQA) the
question. Hint draws come from per-record RNG streams derived from the run
seed and the record id, so parallel rendering can never change the output.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from typing import Any, Sequence

from .geometry import SpeechGeometryConfig, audio_token_budget
from .manifest import (
    CorpusRecord,
    DatasetManifest,
    LanguageTag,
    ManifestError,
    Stage,
    TaskTag,
    mixture_stats,
)

DEFAULT_HINT_PROBABILITY = 0.95


@dataclass(frozen=True)
class HintPolicy:
    probability: float = DEFAULT_HINT_PROBABILITY
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.probability <= 1.0):
            raise ValueError("hint probability must be in [0, 1]")


@dataclass(frozen=True)
class RenderedExample:
    id: str
    audio_path: str
    duration_s: float
    prefix_text: str
    target_text: str
    audio_token_budget: int
    has_length_hint: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "audio_path": self.audio_path,
            "duration_s": self.duration_s,
            "prefix_text": self.prefix_text,
            "target_text": self.target_text,
            "audio_token_budget": self.audio_token_budget,
            "has_length_hint": self.has_length_hint,
        }


def tag_for(task: TaskTag, target_lang: LanguageTag) -> str:
    """Language tag immediately followed by task tag, e.g. '<|en|><|transcribe|>'."""
    return target_lang.render() + task.render()


def length_hint(target_text: str, target_lang: LanguageTag) -> str:
    """'<|len:N|>' where N is whitespace tokens (en/de) or non-space chars (zh)."""
    if not target_text:
        raise ValueError("target_text must be non-empty")
    if target_lang is LanguageTag.ZH:
        count = sum(1 for ch in target_text if not ch.isspace())
    else:
        count = len(target_text.split())
    return f"<|len:{count}|>"


def record_rng(seed: int, record_id: str) -> random.Random:
    """Per-record RNG stream; independent of render order and parallelism."""
    digest = hashlib.sha256(f"{seed}:{record_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def render_example(
    record: CorpusRecord,
    policy: HintPolicy,
    geometry: SpeechGeometryConfig | None = None,
) -> RenderedExample:
    geometry = geometry or SpeechGeometryConfig()
    rng = record_rng(policy.rng_seed, record.id)
    has_hint = rng.random() < policy.probability
    prefix = tag_for(record.task, record.target_lang)
    if has_hint:
        prefix += length_hint(record.target_text, record.target_lang)
    if record.task is TaskTag.SQA:
        prefix += record.question
    return RenderedExample(
        id=record.id,
        audio_path=record.audio_path,
        duration_s=record.duration_s,
        prefix_text=prefix,
        target_text=record.target_text,
        audio_token_budget=audio_token_budget(record.duration_s, geometry),
        has_length_hint=has_hint,
    )


class StageError(ValueError):
    """Stage gate violation: non-ASR records offered to the MA stage."""

    def __init__(self, offenders: Sequence[str]):
        self.offenders = list(offenders)
        shown = ", ".join(self.offenders[:10])
        super().__init__(
            f"MA stage accepts only ASR records; offending ids: {shown}"
            + (" ..." if len(self.offenders) > 10 else "")
        )


def assemble_stage(
    manifests: Sequence[tuple[str, DatasetManifest]],
    stage: Stage,
    policy: HintPolicy,
    geometry: SpeechGeometryConfig | None = None,
    shuffle_seed: int = 0,
) -> tuple[list[RenderedExample], dict[tuple[str, str, str], float]]:
    """Merge named manifests into one rendered, deterministically shuffled stage.

    Returns the rendered examples plus the hours-per-(task, lang, corpus)
    mixture table of the merged input.
    """
    merged: list[CorpusRecord] = []
    for _, manifest in manifests:
        merged.extend(manifest.records)

    if stage is Stage.MA:
        offenders = [rec.id for rec in merged if rec.task is not TaskTag.ASR]
        if offenders:
            raise StageError(offenders)

    seen: set[str] = set()
    for rec in merged:
        if rec.id in seen:
            raise ManifestError(f"duplicate record id across inputs: {rec.id!r}")
        seen.add(rec.id)

    stats = mixture_stats(DatasetManifest(records=tuple(merged), stage=stage))

    rng = random.Random(shuffle_seed)
    rng.shuffle(merged)
    rendered = [render_example(rec, policy, geometry) for rec in merged]
    return rendered, stats


def serialize_rendered(examples: Sequence[RenderedExample]) -> bytes:
    lines = [
        json.dumps(ex.to_dict(), ensure_ascii=False, separators=(",", ":"))
        for ex in examples
    ]
    if not lines:
        return b""
    return ("\n".join(lines) + "\n").encode("utf-8")
