"""Multi-system pseudolabeling with quality-estimation oracle filtering.

Every ASR transcription is translated by all registered systems, each
hypothesis is QE-scored, the argmax hypothesis wins (oracle), and the record
is kept only if the winning score clears the threshold. Because the oracle
keep-set is the union of the per-system keep-sets, oracle retention can never
fall below any single system's retention.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

from .backends import BackendError, QeScorer, SystemId, Translator, map_ordered
from .manifest import (
    CorpusRecord,
    DatasetManifest,
    LanguageTag,
    Stage,
    TaskTag,
)

logger = logging.getLogger(__name__)

DEFAULT_ST_THRESHOLD = 0.85


@dataclass(frozen=True)
class TranslationCandidate:
    system: SystemId
    hypothesis: str
    score: float | None = None

    def __post_init__(self) -> None:
        if not self.hypothesis:
            raise ValueError(f"system {self.system!r}: empty hypothesis")
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise ValueError(f"system {self.system!r}: score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class OracleDecision:
    best: TranslationCandidate
    kept: bool
    threshold: float


class PseudolabelFailure(Exception):
    """Raised when every translation system failed for one record."""


def generate_candidates(
    record: CorpusRecord,
    target_lang: LanguageTag,
    registry: Mapping[SystemId, Translator],
) -> tuple[list[TranslationCandidate], list[tuple[SystemId, str]]]:
    """Translate one ASR record with every system, in registry order.

    Returns unscored candidates plus (system, reason) omissions for systems
    that failed terminally. Raises PseudolabelFailure when nothing survived.
    """
    if record.task is not TaskTag.ASR:
        raise ValueError(f"record {record.id!r}: pseudolabeling requires ASR input")
    if target_lang is record.source_lang:
        raise ValueError(f"record {record.id!r}: target_lang equals source_lang")
    if not registry:
        raise ValueError("translation registry must be non-empty")

    candidates: list[TranslationCandidate] = []
    omissions: list[tuple[SystemId, str]] = []
    for system, translator in registry.items():
        try:
            hypothesis = translator.translate(
                record.transcript, record.source_lang, target_lang
            )
            candidates.append(TranslationCandidate(system=system, hypothesis=hypothesis))
        except BackendError as exc:
            omissions.append((system, str(exc)))
            logger.warning("record %s: system %s omitted: %s", record.id, system, exc)
    if not candidates:
        raise PseudolabelFailure(
            f"record {record.id!r}: all {len(registry)} systems failed"
        )
    return candidates, omissions


def score_candidates(
    record: CorpusRecord,
    target_lang: LanguageTag,
    candidates: Sequence[TranslationCandidate],
    scorer: QeScorer,
) -> list[TranslationCandidate]:
    return [
        TranslationCandidate(
            system=cand.system,
            hypothesis=cand.hypothesis,
            score=scorer.score(
                record.transcript, cand.hypothesis, record.source_lang, target_lang
            ),
        )
        for cand in candidates
    ]


def select_oracle(
    candidates: Sequence[TranslationCandidate], threshold: float
) -> OracleDecision:
    """Argmax-by-score selection; ties go to the earliest registry position."""
    if not candidates:
        raise ValueError("candidate list must be non-empty")
    for cand in candidates:
        if cand.score is None:
            raise ValueError(f"system {cand.system!r}: candidate is unscored")
    best = max(candidates, key=lambda c: c.score)  # max() keeps the first maximum
    return OracleDecision(best=best, kept=best.score >= threshold, threshold=threshold)


@dataclass(frozen=True)
class RetentionReport:
    """Table-2-shaped retention accounting for one pseudolabeling run."""

    threshold: float
    total: int
    kept: int
    dropped: int
    failed: int
    per_system_kept: Mapping[SystemId, int]

    def __post_init__(self) -> None:
        if self.kept + self.dropped + self.failed != self.total:
            raise ValueError("kept + dropped + failed must equal total")

    @property
    def oracle_rate(self) -> float:
        return self.kept / self.total if self.total else 0.0

    def system_rate(self, system: SystemId) -> float:
        return self.per_system_kept[system] / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "total": self.total,
            "kept": self.kept,
            "dropped": self.dropped,
            "failed": self.failed,
            "per_system": {
                system: {"kept": count, "rate": self.system_rate(system)}
                for system, count in self.per_system_kept.items()
            },
            "oracle": {"kept": self.kept, "rate": self.oracle_rate},
        }


def retention_report(
    systems: Sequence[SystemId],
    score_matrix: Sequence[Sequence[float | None]],
    threshold: float,
    failed: int = 0,
) -> RetentionReport:
    """Build retention figures from a records-by-systems score matrix.

    A None entry means the system produced no scored hypothesis for that
    record; it counts against the system but a record with at least one score
    still participates in the oracle.
    """
    per_system = {system: 0 for system in systems}
    kept = 0
    dropped = 0
    for row in score_matrix:
        if len(row) != len(systems):
            raise ValueError("score matrix must be rectangular over systems")
        scores = [s for s in row if s is not None]
        for system, score in zip(systems, row):
            if score is not None and score >= threshold:
                per_system[system] += 1
        if scores and max(scores) >= threshold:
            kept += 1
        else:
            dropped += 1
    total = len(score_matrix) + failed
    report = RetentionReport(
        threshold=threshold,
        total=total,
        kept=kept,
        dropped=dropped,
        failed=failed,
        per_system_kept=per_system,
    )
    # Oracle dominance is a set-union consequence; cheap to assert here.
    assert all(report.kept >= count for count in per_system.values())
    return report


def pseudolabel_corpus(
    asr_manifest: DatasetManifest,
    target_lang: LanguageTag,
    registry: Mapping[SystemId, Translator],
    scorer: QeScorer,
    threshold: float = DEFAULT_ST_THRESHOLD,
    jobs: int = 1,
) -> tuple[DatasetManifest, RetentionReport]:
    """Pseudolabel an ASR corpus into an ST corpus, reporting retention."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("threshold must be in [0, 1]")
    for rec in asr_manifest.records:
        if rec.task is not TaskTag.ASR:
            raise ValueError(f"record {rec.id!r}: input manifest must be ASR-only")

    systems = list(registry)

    def process(rec: CorpusRecord):
        try:
            candidates, omissions = generate_candidates(rec, target_lang, registry)
        except PseudolabelFailure as exc:
            return None, None, str(exc)
        scored = score_candidates(rec, target_lang, candidates, scorer)
        by_system = {c.system: c.score for c in scored}
        row = [by_system.get(system) for system in systems]
        decision = select_oracle(scored, threshold)
        return decision, row, None

    results = map_ordered(process, asr_manifest.records, jobs=jobs)

    out_records: list[CorpusRecord] = []
    matrix: list[list[float | None]] = []
    failures = 0
    for rec, (decision, row, failure) in zip(asr_manifest.records, results):
        if failure is not None:
            failures += 1
            logger.error("record %s: pseudolabel failed: %s", rec.id, failure)
            continue
        matrix.append(row)
        if decision.kept:
            out_records.append(
                rec.with_fields(
                    # Derived id so the ST corpus can be mixed with its source.
                    id=f"{rec.id}-st-{target_lang.value}",
                    task=TaskTag.ST,
                    target_lang=target_lang,
                    target_text=decision.best.hypothesis,
                    provenance=rec.provenance.__class__(
                        corpus_name=rec.provenance.corpus_name,
                        license=rec.provenance.license,
                        system_id=decision.best.system,
                        qe_score=decision.best.score,
                    ),
                )
            )
    report = retention_report(systems, matrix, threshold, failed=failures)
    st_manifest = DatasetManifest(records=tuple(out_records), stage=Stage.IFT)
    return st_manifest, report
