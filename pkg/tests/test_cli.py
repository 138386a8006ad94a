import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from corpusforge.cli import main
from corpusforge.manifest import (
    DatasetManifest,
    LanguageTag,
    Stage,
    TaskTag,
    serialize_manifest,
)

from conftest import make_asr


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def asr_file(tmp_path) -> Path:
    manifest = DatasetManifest(
        records=tuple(make_asr(i, duration_s=3.0 + i) for i in range(5)),
        stage=Stage.MA,
    )
    path = tmp_path / "asr.jsonl"
    path.write_bytes(serialize_manifest(manifest))
    return path


@pytest.fixture
def contexts_file(tmp_path) -> Path:
    ctx = {
        "context_id": "c1",
        "transcript": "The sky is blue.",
        "audio_path": "c1.wav",
        "duration_s": 12.0,
        "qa_pairs": [{"question": "What color is the sky?", "answer": "blue"}],
    }
    path = tmp_path / "contexts.jsonl"
    path.write_text(json.dumps(ctx) + "\n")
    return path


class TestValidate:
    def test_valid_manifest(self, runner, asr_file):
        result = runner.invoke(main, ["validate", "--input", str(asr_file), "--stage", "ma"])
        assert result.exit_code == 0

    def test_missing_file_exit_2(self, runner, tmp_path):
        missing = tmp_path / "nope.jsonl"
        result = runner.invoke(main, ["validate", "--input", str(missing)])
        assert result.exit_code == 2
        assert str(missing) in result.output

    def test_round_trip_fixture(self, runner, asr_file):
        result = runner.invoke(main, ["validate", "--input", str(asr_file), "--stage", "ift"])
        assert result.exit_code == 0


class TestPseudolabel:
    def test_mock_run_writes_outputs(self, runner, asr_file, tmp_path):
        out = tmp_path / "st.jsonl"
        report = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["--seed", "7", "pseudolabel", "--input", str(asr_file),
             "--target-lang", "de", "--out", str(out), "--report", str(report)],
        )
        assert result.exit_code == 0, result.output
        assert out.exists() and report.exists()
        payload = json.loads(report.read_text())
        assert payload["total"] == 5
        assert payload["kept"] + payload["dropped"] + payload["failed"] == 5
        assert (tmp_path / "st.jsonl.meta.json").exists()

    def test_missing_input_exit_2(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["pseudolabel", "--input", str(tmp_path / "nope.jsonl"),
             "--target-lang", "de", "--out", str(tmp_path / "o"), "--report", str(tmp_path / "r")],
        )
        assert result.exit_code == 2

    def test_all_backends_down_exit_3(self, runner, asr_file, tmp_path):
        config = tmp_path / "cfg.toml"
        config.write_text(
            '[backends]\nmode = "http"\nregistry = ["mt-1"]\n'
            "max_attempts = 2\nbase_delay_s = 0.001\n"
            '[backends.systems.mt-1]\nurl = "http://127.0.0.1:1"\n'
            '[backends.scorer]\nurl = "http://127.0.0.1:1"\n'
        )
        out = tmp_path / "st.jsonl"
        report = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["--config", str(config), "pseudolabel", "--input", str(asr_file),
             "--target-lang", "de", "--out", str(out), "--report", str(report)],
        )
        assert result.exit_code == 3, result.output
        payload = json.loads(report.read_text())
        assert payload["failed"] == 5 and payload["kept"] == 0


class TestSynthQa:
    def test_mock_run_caps_unanswerable(self, runner, contexts_file, tmp_path):
        out = tmp_path / "sqa.jsonl"
        report = tmp_path / "qa_report.json"
        result = runner.invoke(
            main,
            ["--seed", "3", "synth-qa", "--contexts", str(contexts_file),
             "--langs", "en,de,zh", "--out", str(out), "--report", str(report)],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_bytes().decode().splitlines()
        unanswerable = [json.loads(l) for l in lines if not json.loads(l)["answerable"]]
        assert len(unanswerable) <= 6
        per_cell: dict = {}
        for rec in unanswerable:
            key = rec["target_lang"]
            per_cell[key] = per_cell.get(key, 0) + 1
        assert all(count <= 2 for count in per_cell.values())
        payload = json.loads(report.read_text())
        assert "balance" in payload and "translated_pairs" in payload

    def test_invalid_threshold_exit_2(self, runner, contexts_file, tmp_path):
        result = runner.invoke(
            main,
            ["synth-qa", "--contexts", str(contexts_file), "--q-threshold", "1.01",
             "--out", str(tmp_path / "o"), "--report", str(tmp_path / "r")],
        )
        assert result.exit_code == 2


class TestAssembleAndStats:
    def test_ma_with_st_input_exit_2(self, runner, asr_file, tmp_path):
        st_rec = make_asr(9).with_fields(
            task=TaskTag.ST, target_lang=LanguageTag.DE, target_text="hallo"
        )
        st_path = tmp_path / "st.jsonl"
        st_path.write_bytes(
            serialize_manifest(DatasetManifest(records=(st_rec,), stage=Stage.IFT))
        )
        result = runner.invoke(
            main,
            ["assemble", "--stage", "ma", "--inputs", f"{asr_file},{st_path}",
             "--out", str(tmp_path / "o"), "--stats", str(tmp_path / "s")],
        )
        assert result.exit_code == 2
        assert "r9" in result.output

    def test_stats_hand_computed(self, runner, asr_file, tmp_path):
        out = tmp_path / "stats.json"
        result = runner.invoke(
            main, ["stats", "--input", str(asr_file), "--out", str(out)]
        )
        assert result.exit_code == 0
        rows = json.loads(out.read_text())["rows"]
        # durations 3..7 s, all (ASR, en, CV)
        assert rows == [
            {"task": "ASR", "target_lang": "en", "corpus_name": "CV",
             "hours": pytest.approx(25.0 / 3600)}
        ]

    def test_assemble_ift_succeeds(self, runner, asr_file, tmp_path):
        out = tmp_path / "stage.jsonl"
        stats = tmp_path / "stats.json"
        result = runner.invoke(
            main,
            ["--seed", "17", "assemble", "--stage", "ift", "--inputs", str(asr_file),
             "--hint-prob", "1.0", "--out", str(out), "--stats", str(stats)],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_bytes().decode().splitlines()
        assert len(lines) == 5
        assert all(json.loads(l)["has_length_hint"] for l in lines)


class TestReproducibility:
    def _run_all(self, runner, asr_file, contexts_file, base: Path) -> dict[str, bytes]:
        base.mkdir()
        paths = {
            "st": base / "st.jsonl",
            "rep": base / "rep.json",
            "sqa": base / "sqa.jsonl",
            "qrep": base / "qrep.json",
            "stage": base / "stage.jsonl",
            "stats": base / "stats.json",
        }
        for args in (
            ["--seed", "17", "pseudolabel", "--input", str(asr_file), "--target-lang", "de",
             "--out", str(paths["st"]), "--report", str(paths["rep"])],
            ["--seed", "17", "synth-qa", "--contexts", str(contexts_file),
             "--out", str(paths["sqa"]), "--report", str(paths["qrep"])],
            ["--seed", "17", "assemble", "--stage", "ift",
             "--inputs", f"{asr_file},{paths['st']},{paths['sqa']}",
             "--out", str(paths["stage"]), "--stats", str(paths["stats"])],
        ):
            result = runner.invoke(main, args)
            assert result.exit_code == 0, result.output
        return {name: path.read_bytes() for name, path in paths.items()}

    def test_two_runs_are_byte_identical(self, runner, asr_file, contexts_file, tmp_path):
        first = self._run_all(runner, asr_file, contexts_file, tmp_path / "run1")
        second = self._run_all(runner, asr_file, contexts_file, tmp_path / "run2")
        assert first == second
