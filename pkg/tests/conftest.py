import pytest

from corpusforge.manifest import (
    CorpusRecord,
    DatasetManifest,
    LanguageTag,
    ProvenanceInfo,
    Stage,
    TaskTag,
)


def make_asr(
    idx: int,
    duration_s: float = 3.0,
    lang: LanguageTag = LanguageTag.EN,
    corpus: str = "CV",
    transcript: str | None = None,
) -> CorpusRecord:
    text = transcript if transcript is not None else f"hello world {idx}"
    return CorpusRecord(
        id=f"r{idx}",
        audio_path=f"audio/r{idx}.wav",
        duration_s=duration_s,
        task=TaskTag.ASR,
        source_lang=lang,
        target_lang=lang,
        transcript=text,
        target_text=text,
        provenance=ProvenanceInfo(corpus_name=corpus, license="CC-BY 4.0"),
    )


@pytest.fixture
def asr_manifest() -> DatasetManifest:
    return DatasetManifest(
        records=tuple(make_asr(i) for i in range(5)), stage=Stage.IFT
    )
