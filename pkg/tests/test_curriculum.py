import re

import pytest

from corpusforge.curriculum import (
    HintPolicy,
    StageError,
    assemble_stage,
    length_hint,
    render_example,
    serialize_rendered,
    tag_for,
)
from corpusforge.manifest import (
    UNANSWERABLE_SENTINEL,
    DatasetManifest,
    LanguageTag,
    ManifestError,
    Stage,
    TaskTag,
)

from conftest import make_asr

EN, DE, ZH = LanguageTag.EN, LanguageTag.DE, LanguageTag.ZH

PREFIX_GRAMMAR = re.compile(
    r"^<\|(en|de|zh)\|><\|(transcribe|translate|reply)\|>(<\|len:\d+\|>)?(.*)$"
)


class TestTagFor:
    def test_asr_en(self):
        assert tag_for(TaskTag.ASR, EN) == "<|en|><|transcribe|>"

    def test_st_zh(self):
        assert tag_for(TaskTag.ST, ZH) == "<|zh|><|translate|>"

    def test_sqa_de(self):
        assert tag_for(TaskTag.SQA, DE) == "<|de|><|reply|>"


class TestLengthHint:
    def test_whitespace_tokens_for_en(self):
        assert length_hint("hello world", EN) == "<|len:2|>"

    def test_character_count_for_zh(self):
        assert length_hint("你好", ZH) == "<|len:2|>"

    def test_zh_ignores_whitespace(self):
        assert length_hint("你 好", ZH) == "<|len:2|>"

    def test_single_token_de(self):
        assert length_hint("a", DE) == "<|len:1|>"


class TestRenderExample:
    def test_probability_zero_never_hints(self):
        policy = HintPolicy(probability=0.0, rng_seed=1)
        assert all(
            not render_example(make_asr(i), policy).has_length_hint for i in range(200)
        )

    def test_probability_one_always_hints(self):
        policy = HintPolicy(probability=1.0, rng_seed=1)
        assert all(
            render_example(make_asr(i), policy).has_length_hint for i in range(200)
        )

    def test_prefix_grammar(self):
        policy = HintPolicy(probability=0.5, rng_seed=9)
        sqa = make_asr(0).with_fields(
            id="sqa0",
            task=TaskTag.SQA,
            target_lang=DE,
            question="Wo?",
            answerable=True,
            target_text="dort",
        )
        for rec in [make_asr(1), sqa]:
            for seed in range(20):
                rendered = render_example(rec, HintPolicy(probability=0.5, rng_seed=seed))
                match = PREFIX_GRAMMAR.match(rendered.prefix_text)
                assert match, rendered.prefix_text
                assert (match.group(3) is not None) == rendered.has_length_hint

    def test_sqa_question_appended_after_tags(self):
        sqa = make_asr(0).with_fields(
            id="sqa0",
            task=TaskTag.SQA,
            target_lang=DE,
            question="Wo ist es?",
            answerable=False,
            target_text=UNANSWERABLE_SENTINEL,
        )
        rendered = render_example(sqa, HintPolicy(probability=0.0))
        assert rendered.prefix_text == "<|de|><|reply|>Wo ist es?"

    def test_hint_is_independent_of_render_order(self):
        policy = HintPolicy(probability=0.5, rng_seed=3)
        first = [render_example(make_asr(i), policy).has_length_hint for i in range(50)]
        second = [
            render_example(make_asr(i), policy).has_length_hint
            for i in reversed(range(50))
        ]
        assert first == list(reversed(second))

    def test_hint_frequency_within_binomial_band(self):
        n = 20000
        p = 0.95
        policy = HintPolicy(probability=p, rng_seed=11)
        hits = sum(render_example(make_asr(i), policy).has_length_hint for i in range(n))
        band = 3 * (p * (1 - p) / n) ** 0.5
        assert abs(hits / n - p) <= band


class TestAssembleStage:
    def _ift_fixture(self):
        asr = DatasetManifest(
            records=(make_asr(0, duration_s=30.0), make_asr(1, duration_s=30.0)),
            stage=Stage.IFT,
        )
        st_rec = make_asr(2, duration_s=60.0).with_fields(
            id="st0", task=TaskTag.ST, target_lang=DE, target_text="hallo welt"
        )
        sqa_rec = make_asr(3, duration_s=120.0).with_fields(
            id="sqa0",
            task=TaskTag.SQA,
            target_lang=ZH,
            question="Q?",
            answerable=True,
            target_text="answer",
        )
        other = DatasetManifest(records=(st_rec, sqa_rec), stage=Stage.IFT)
        return [("asr", asr), ("other", other)]

    def test_ma_accepts_asr_only(self):
        asr = DatasetManifest(records=(make_asr(0),), stage=Stage.MA)
        rendered, _ = assemble_stage([("a", asr)], Stage.MA, HintPolicy(rng_seed=0))
        assert len(rendered) == 1

    def test_ma_rejects_st_with_offender_ids(self):
        st_rec = make_asr(0).with_fields(
            id="bad", task=TaskTag.ST, target_lang=DE, target_text="x"
        )
        bad = DatasetManifest(records=(make_asr(1), st_rec), stage=Stage.IFT)
        with pytest.raises(StageError, match="bad"):
            assemble_stage([("a", bad)], Stage.MA, HintPolicy(rng_seed=0))

    def test_ift_stats_hand_computed(self):
        rendered, stats = assemble_stage(
            self._ift_fixture(), Stage.IFT, HintPolicy(probability=0.0, rng_seed=0)
        )
        assert len(rendered) == 4
        assert stats == pytest.approx(
            {
                ("ASR", "en", "CV"): 60.0 / 3600,
                ("ST", "de", "CV"): 60.0 / 3600,
                ("SQA", "zh", "CV"): 120.0 / 3600,
            }
        )

    def test_deterministic_output_bytes(self):
        first, _ = assemble_stage(
            self._ift_fixture(), Stage.IFT, HintPolicy(rng_seed=17), shuffle_seed=17
        )
        second, _ = assemble_stage(
            self._ift_fixture(), Stage.IFT, HintPolicy(rng_seed=17), shuffle_seed=17
        )
        assert serialize_rendered(first) == serialize_rendered(second)

    def test_duplicate_ids_across_inputs_rejected(self):
        asr = DatasetManifest(records=(make_asr(0),), stage=Stage.IFT)
        with pytest.raises(ManifestError, match="duplicate record id"):
            assemble_stage([("a", asr), ("b", asr)], Stage.IFT, HintPolicy(rng_seed=0))
