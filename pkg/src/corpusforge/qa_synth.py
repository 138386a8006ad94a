"""Synthetic spoken-QA corpus construction.

Two mechanisms: (1) translating question/answer pairs into German and Chinese
with a QE gate on the question only, the answer always translated by the
system that won the question; (2) generating up to two unanswerable questions
per context and language from a fixed prompt template.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .backends import (
    BackendError,
    GenerationParams,
    Generator,
    QeScorer,
    SystemId,
    Translator,
)
from .manifest import (
    UNANSWERABLE_SENTINEL,
    CorpusRecord,
    LanguageTag,
    ProvenanceInfo,
    TaskTag,
)
from .pseudolabel import TranslationCandidate, select_oracle

logger = logging.getLogger(__name__)

DEFAULT_QUESTION_THRESHOLD = 0.80
MAX_UNANSWERABLE_PER_CELL = 2


@dataclass(frozen=True)
class QaPair:
    question: str
    answer: str

    def __post_init__(self) -> None:
        if not self.question or not self.answer:
            raise ValueError("question and answer must be non-empty")


@dataclass(frozen=True)
class QaContext:
    """One spoken passage with its answerable question/answer pairs."""

    context_id: str
    transcript: str
    audio_path: str
    duration_s: float
    qa_pairs: tuple[QaPair, ...]

    def __post_init__(self) -> None:
        if not self.context_id or not self.transcript:
            raise ValueError("context_id and transcript must be non-empty")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if not self.qa_pairs:
            raise ValueError(
                f"context {self.context_id!r}: at least one example question required"
            )

    @property
    def example_questions(self) -> tuple[str, ...]:
        return tuple(pair.question for pair in self.qa_pairs)


def contexts_from_jsonl(source: bytes | str | Iterable[str]) -> list[QaContext]:
    if isinstance(source, bytes):
        lines: Iterable[str] = source.decode("utf-8").split("\n")
    elif isinstance(source, str):
        lines = source.split("\n")
    else:
        lines = source
    contexts: list[QaContext] = []
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            data = json.loads(line)
            contexts.append(
                QaContext(
                    context_id=data["context_id"],
                    transcript=data["transcript"],
                    audio_path=data["audio_path"],
                    duration_s=float(data["duration_s"]),
                    qa_pairs=tuple(
                        QaPair(question=p["question"], answer=p["answer"])
                        for p in data["qa_pairs"]
                    ),
                )
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"contexts line {line_no}: {exc}") from exc
    return contexts


@dataclass(frozen=True)
class TranslatedQaPair:
    question: str
    answer: str
    question_score: float
    system: SystemId
    target_lang: LanguageTag


@dataclass(frozen=True)
class PairOutcome:
    status: str  # "kept" | "dropped" | "failed"
    pair: TranslatedQaPair | None = None
    reason: str | None = None


def translate_qa_pair(
    question: str,
    answer: str,
    target_lang: LanguageTag,
    registry: Mapping[SystemId, Translator],
    scorer: QeScorer,
    q_threshold: float = DEFAULT_QUESTION_THRESHOLD,
    source_lang: LanguageTag = LanguageTag.EN,
) -> PairOutcome:
    """Translate one QA pair; keep iff the best question clears the gate.

    The answer is translated by the question's winning system with no QE gate,
    and there is no fallback: if that system fails on the answer the pair
    fails.
    """
    if not question or not answer:
        raise ValueError("question and answer must be non-empty")
    candidates: list[TranslationCandidate] = []
    for system, translator in registry.items():
        try:
            hyp = translator.translate(question, source_lang, target_lang)
        except BackendError as exc:
            logger.warning("question translation: system %s failed: %s", system, exc)
            continue
        score = scorer.score(question, hyp, source_lang, target_lang)
        candidates.append(
            TranslationCandidate(system=system, hypothesis=hyp, score=score)
        )
    if not candidates:
        return PairOutcome(status="failed", reason="all systems failed on the question")
    decision = select_oracle(candidates, q_threshold)
    if not decision.kept:
        return PairOutcome(
            status="dropped",
            reason=f"best question score {decision.best.score} < {q_threshold}",
        )
    winner = decision.best.system
    try:
        translated_answer = registry[winner].translate(answer, source_lang, target_lang)
    except BackendError as exc:
        return PairOutcome(
            status="failed", reason=f"winning system {winner!r} failed on the answer: {exc}"
        )
    return PairOutcome(
        status="kept",
        pair=TranslatedQaPair(
            question=decision.best.hypothesis,
            answer=translated_answer,
            question_score=decision.best.score,
            system=winner,
            target_lang=target_lang,
        ),
    )


def load_prompt_template() -> str:
    text = (
        resources.files("corpusforge.assets")
        .joinpath("unanswerable_prompt.txt")
        .read_text(encoding="utf-8")
    )
    return text.rstrip("\n")


def build_unanswerable_prompt(
    context: QaContext, example_question: str, target_lang: LanguageTag
) -> str:
    """Fill the prompt template; byte-deterministic for identical inputs."""
    template = load_prompt_template()
    return (
        template.replace("[LANG_ID]", target_lang.display_name)
        .replace("[CONTEXT]", context.transcript)
        .replace("[QUESTION]", example_question)
    )


class UnanswerableParseError(ValueError):
    pass


_ENUMERATION = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s*")


def parse_unanswerable_response(raw: str) -> list[str]:
    """Extract at most two questions from raw generator output.

    One question per line; enumeration markers are stripped; blank lines are
    dropped. Zero usable lines is a parse failure.
    """
    questions: list[str] = []
    for line in raw.splitlines():
        cleaned = _ENUMERATION.sub("", line).strip()
        if cleaned:
            questions.append(cleaned)
        if len(questions) == MAX_UNANSWERABLE_PER_CELL:
            break
    if not questions:
        raise UnanswerableParseError("no usable questions in generator output")
    if len(questions) < MAX_UNANSWERABLE_PER_CELL:
        logger.info("generator produced only %d question(s)", len(questions))
    return questions


def synthesize_unanswerable(
    contexts: Sequence[QaContext],
    langs: Sequence[LanguageTag],
    generator: Generator,
    params: GenerationParams | None = None,
) -> tuple[list[CorpusRecord], list[dict]]:
    """Generate capped unanswerable SQA records per (context, lang).

    Each failed cell is retried once, then skipped; skips are returned, not
    raised, so one bad context never aborts the run.
    """
    params = params or GenerationParams()
    records: list[CorpusRecord] = []
    skips: list[dict] = []
    for context in contexts:
        example_question = context.example_questions[0]
        for lang in langs:
            prompt = build_unanswerable_prompt(context, example_question, lang)
            questions: list[str] | None = None
            reason = ""
            for _ in range(2):  # one retry per cell
                try:
                    raw = generator.generate(prompt, params)
                    questions = parse_unanswerable_response(raw)
                    break
                except (BackendError, UnanswerableParseError) as exc:
                    reason = str(exc)
            if questions is None:
                skips.append(
                    {"context_id": context.context_id, "lang": lang.value, "reason": reason}
                )
                logger.warning(
                    "context %s lang %s: unanswerable generation skipped: %s",
                    context.context_id,
                    lang.value,
                    reason,
                )
                continue
            for idx, q in enumerate(questions, start=1):
                records.append(
                    CorpusRecord(
                        id=f"{context.context_id}-unans-{lang.value}-{idx}",
                        audio_path=context.audio_path,
                        duration_s=context.duration_s,
                        task=TaskTag.SQA,
                        source_lang=LanguageTag.EN,
                        target_lang=lang,
                        transcript=context.transcript,
                        target_text=UNANSWERABLE_SENTINEL,
                        question=q,
                        answerable=False,
                        provenance=ProvenanceInfo(
                            corpus_name="generated", license="", system_id="generator"
                        ),
                    )
                )
    return records, skips


def balance_report(records: Sequence[CorpusRecord]) -> dict[str, dict]:
    """Per-language answerable/unanswerable counts and unanswerable ratio."""
    report: dict[str, dict] = {}
    for rec in records:
        if rec.task is not TaskTag.SQA:
            raise ValueError(f"record {rec.id!r}: balance_report expects SQA records")
        row = report.setdefault(
            rec.target_lang.value, {"answerable": 0, "unanswerable": 0}
        )
        row["answerable" if rec.answerable else "unanswerable"] += 1
    for row in report.values():
        total = row["answerable"] + row["unanswerable"]
        row["unanswerable_ratio"] = row["unanswerable"] / total
    return report


def synthesize_qa_corpus(
    contexts: Sequence[QaContext],
    langs: Sequence[LanguageTag],
    registry: Mapping[SystemId, Translator],
    scorer: QeScorer,
    generator: Generator,
    q_threshold: float = DEFAULT_QUESTION_THRESHOLD,
    params: GenerationParams | None = None,
) -> tuple[list[CorpusRecord], dict]:
    """Full SQA synthesis: pass-through English pairs, translated pairs for the
    other languages, plus generated unanswerables for every language."""
    records: list[CorpusRecord] = []
    pair_counts = {
        lang.value: {"kept": 0, "dropped": 0, "failed": 0} for lang in langs
    }
    for context in contexts:
        for pair_idx, pair in enumerate(context.qa_pairs, start=1):
            for lang in langs:
                if lang is LanguageTag.EN:
                    question, answer, system = pair.question, pair.answer, None
                else:
                    outcome = translate_qa_pair(
                        pair.question, pair.answer, lang, registry, scorer, q_threshold
                    )
                    pair_counts[lang.value][outcome.status] += 1
                    if outcome.status != "kept":
                        continue
                    question = outcome.pair.question
                    answer = outcome.pair.answer
                    system = outcome.pair.system
                records.append(
                    CorpusRecord(
                        id=f"{context.context_id}-q{pair_idx}-{lang.value}",
                        audio_path=context.audio_path,
                        duration_s=context.duration_s,
                        task=TaskTag.SQA,
                        source_lang=LanguageTag.EN,
                        target_lang=lang,
                        transcript=context.transcript,
                        target_text=answer,
                        question=question,
                        answerable=True,
                        provenance=ProvenanceInfo(
                            corpus_name="spoken-squad",
                            license="",
                            system_id=system,
                        ),
                    )
                )
    unans, skips = synthesize_unanswerable(contexts, langs, generator, params)
    records.extend(unans)
    report = {
        "q_threshold": q_threshold,
        "translated_pairs": pair_counts,
        "generation_skips": skips,
        "balance": balance_report(records),
    }
    return records, report
