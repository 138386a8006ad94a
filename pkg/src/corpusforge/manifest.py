"""Corpus record data model and line-delimited manifest I/O.

Manifests are UTF-8 JSON lines, one record per line. Serialization is
canonical (fixed key order, no whitespace), so identical manifests always
produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Any, Iterable, Mapping

UNANSWERABLE_SENTINEL = "unanswerable"


class LanguageTag(str, Enum):
    EN = "en"
    DE = "de"
    ZH = "zh"

    def render(self) -> str:
        return f"<|{self.value}|>"

    @property
    def display_name(self) -> str:
        return _LANGUAGE_NAMES[self]


_LANGUAGE_NAMES = {
    LanguageTag.EN: "English",
    LanguageTag.DE: "German",
    LanguageTag.ZH: "Chinese",
}


class TaskTag(str, Enum):
    ASR = "ASR"
    ST = "ST"
    SQA = "SQA"

    def render(self) -> str:
        return _TASK_TOKENS[self]


_TASK_TOKENS = {
    TaskTag.ASR: "<|transcribe|>",
    TaskTag.ST: "<|translate|>",
    TaskTag.SQA: "<|reply|>",
}


class Stage(str, Enum):
    MA = "MA"
    IFT = "IFT"


class ManifestError(ValueError):
    """Raised when a manifest line or record violates the schema."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ProvenanceInfo:
    """Where a record's target text came from.

    qe_score is present exactly when target_text was machine-generated and
    quality-scored; gold data carries neither system_id nor qe_score.
    """

    corpus_name: str
    license: str
    system_id: str | None = None
    qe_score: float | None = None

    def __post_init__(self) -> None:
        if not self.corpus_name:
            raise ManifestError("provenance.corpus_name must be non-empty")
        if self.qe_score is not None and not (0.0 <= self.qe_score <= 1.0):
            raise ManifestError(f"qe_score {self.qe_score} outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"corpus_name": self.corpus_name, "license": self.license}
        if self.system_id is not None:
            out["system_id"] = self.system_id
        if self.qe_score is not None:
            out["qe_score"] = self.qe_score
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProvenanceInfo":
        return cls(
            corpus_name=_req_str(data, "corpus_name", "provenance"),
            license=_str_or_empty(data.get("license")),
            system_id=_opt_str(data.get("system_id")),
            qe_score=_opt_float(data.get("qe_score")),
        )


_KNOWN_FIELDS = (
    "id",
    "audio_path",
    "duration_s",
    "task",
    "source_lang",
    "target_lang",
    "transcript",
    "target_text",
    "question",
    "answerable",
    "provenance",
)


@dataclass(frozen=True)
class CorpusRecord:
    """One audio-anchored training example (ASR, ST, or SQA)."""

    id: str
    audio_path: str
    duration_s: float
    task: TaskTag
    source_lang: LanguageTag
    target_lang: LanguageTag
    transcript: str
    target_text: str
    question: str | None = None
    answerable: bool | None = None
    provenance: ProvenanceInfo = field(
        default_factory=lambda: ProvenanceInfo(corpus_name="unknown", license="")
    )
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise ManifestError("record id must be non-empty")
        if self.duration_s <= 0:
            raise ManifestError(f"record {self.id!r}: duration_s must be > 0")
        if self.task is TaskTag.ASR:
            if self.source_lang is not self.target_lang:
                raise ManifestError(
                    f"record {self.id!r}: ASR requires source_lang == target_lang"
                )
            if self.target_text != self.transcript:
                raise ManifestError(
                    f"record {self.id!r}: ASR requires target_text == transcript"
                )
        if self.task is TaskTag.SQA:
            if self.question is None or self.answerable is None:
                raise ManifestError(
                    f"record {self.id!r}: SQA requires question and answerable"
                )
        if self.answerable is False and self.target_text != UNANSWERABLE_SENTINEL:
            raise ManifestError(
                f"record {self.id!r}: unanswerable target_text must be "
                f"{UNANSWERABLE_SENTINEL!r}"
            )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "audio_path": self.audio_path,
            "duration_s": self.duration_s,
            "task": self.task.value,
            "source_lang": self.source_lang.value,
            "target_lang": self.target_lang.value,
            "transcript": self.transcript,
            "target_text": self.target_text,
        }
        if self.question is not None:
            out["question"] = self.question
        if self.answerable is not None:
            out["answerable"] = self.answerable
        out["provenance"] = self.provenance.to_dict()
        for key in sorted(self.extra):
            out[key] = self.extra[key]
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], *, strict: bool = True) -> "CorpusRecord":
        unknown = {k: v for k, v in data.items() if k not in _KNOWN_FIELDS}
        if unknown and strict:
            names = ", ".join(sorted(unknown))
            raise ManifestError(f"unknown field(s): {names}")
        prov_raw = data.get("provenance")
        if prov_raw is None:
            prov = ProvenanceInfo(corpus_name="unknown", license="")
        elif isinstance(prov_raw, Mapping):
            prov = ProvenanceInfo.from_dict(prov_raw)
        else:
            raise ManifestError("provenance must be an object")
        return cls(
            id=_req_str(data, "id", "record"),
            audio_path=_req_str(data, "audio_path", "record"),
            duration_s=_req_float(data, "duration_s"),
            task=_parse_enum(TaskTag, data, "task"),
            source_lang=_parse_enum(LanguageTag, data, "source_lang"),
            target_lang=_parse_enum(LanguageTag, data, "target_lang"),
            transcript=_str_or_empty(data.get("transcript")),
            target_text=_str_or_empty(data.get("target_text")),
            question=_opt_str(data.get("question")),
            answerable=_opt_bool(data.get("answerable")),
            provenance=prov,
            extra=unknown,
        )

    def with_fields(self, **changes: Any) -> "CorpusRecord":
        return replace(self, **changes)


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered collection of corpus records for one training stage."""

    records: tuple[CorpusRecord, ...]
    stage: Stage

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise ManifestError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
        if self.stage is Stage.MA:
            for rec in self.records:
                if rec.task is not TaskTag.ASR:
                    raise ManifestError(
                        f"record {rec.id!r}: MA-stage manifests may only contain "
                        f"ASR records (found {rec.task.value})"
                    )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def parse_manifest(
    source: bytes | str | IO[bytes] | Iterable[str],
    stage: Stage,
    *,
    strict: bool = True,
) -> DatasetManifest:
    """Parse a line-delimited manifest, reporting the line of any bad record.

    In strict mode unknown fields are rejected; in lenient mode they are
    preserved on the record and round-trip through serialization.
    """
    if isinstance(source, bytes):
        lines: Iterable[str] = source.decode("utf-8").split("\n")
    elif isinstance(source, str):
        lines = source.split("\n")
    elif hasattr(source, "read"):
        lines = source.read().decode("utf-8").split("\n")
    else:
        lines = source

    records: list[CorpusRecord] = []
    ids: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"malformed JSON: {exc.msg}", line_no) from exc
        if not isinstance(data, dict):
            raise ManifestError("each line must be a JSON object", line_no)
        try:
            rec = CorpusRecord.from_dict(data, strict=strict)
        except ManifestError as exc:
            raise ManifestError(str(exc), line_no) from exc
        if rec.id in ids:
            raise ManifestError(f"duplicate record id {rec.id!r}", line_no)
        if stage is Stage.MA and rec.task is not TaskTag.ASR:
            raise ManifestError(
                f"record {rec.id!r}: MA-stage manifests may only contain ASR "
                f"records (found {rec.task.value})",
                line_no,
            )
        ids.add(rec.id)
        records.append(rec)
    return DatasetManifest(records=tuple(records), stage=stage)


def serialize_manifest(manifest: DatasetManifest) -> bytes:
    """Serialize to canonical JSON lines; byte-deterministic for equal inputs."""
    lines = [
        json.dumps(rec.to_dict(), ensure_ascii=False, separators=(",", ":"))
        for rec in manifest.records
    ]
    if not lines:
        return b""
    return ("\n".join(lines) + "\n").encode("utf-8")


def mixture_stats(manifest: DatasetManifest) -> dict[tuple[str, str, str], float]:
    """Hours of speech per (task, target_lang, corpus_name) group."""
    hours: dict[tuple[str, str, str], float] = {}
    for rec in manifest.records:
        key = (rec.task.value, rec.target_lang.value, rec.provenance.corpus_name)
        hours[key] = hours.get(key, 0.0) + rec.duration_s / 3600.0
    return hours


def stats_rows(stats: dict[tuple[str, str, str], float]) -> list[dict[str, Any]]:
    """Flatten a stats table into JSON-friendly rows, deterministically ordered."""
    return [
        {"task": task, "target_lang": lang, "corpus_name": corpus, "hours": hours}
        for (task, lang, corpus), hours in sorted(stats.items())
    ]


def _req_str(data: Mapping[str, Any], key: str, ctx: str) -> str:
    value = data.get(key)
    if not isinstance(value, str) or not value:
        raise ManifestError(f"{ctx} field {key!r} must be a non-empty string")
    return value


def _str_or_empty(value: Any) -> str:
    if value is None:
        return ""
    if not isinstance(value, str):
        raise ManifestError(f"expected string, got {type(value).__name__}")
    return value


def _opt_str(value: Any) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise ManifestError(f"expected string, got {type(value).__name__}")
    return value


def _opt_bool(value: Any) -> bool | None:
    if value is None:
        return None
    if not isinstance(value, bool):
        raise ManifestError(f"expected boolean, got {type(value).__name__}")
    return value


def _opt_float(value: Any) -> float | None:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ManifestError(f"expected number, got {type(value).__name__}")
    return float(value)


def _req_float(data: Mapping[str, Any], key: str) -> float:
    value = _opt_float(data.get(key))
    if value is None:
        raise ManifestError(f"field {key!r} is required")
    return value


def _parse_enum(enum_cls, data: Mapping[str, Any], key: str):
    value = data.get(key)
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ManifestError(f"field {key!r} must be one of: {allowed}") from None
