"""CLI surface: every subcommand's happy path plus exit-code mapping."""

from __future__ import annotations

import json

import numpy as np
import pytest

from helpers import make_noise_wav, make_tone
from elnkit import projector, textnorm
from elnkit.cli import main
from elnkit.embed import read_archive, text_key
from test_pipeline import REFS, small_config, write_dataset


def run_cli(*argv: str) -> int:
    return main(list(argv))


class TestExitCodes:
    def test_usage_error_is_1(self, capsys):
        assert run_cli("normalize") == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_command_is_1(self, capsys):
        assert run_cli("frobnicate") == 1

    def test_data_error_is_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"schema": 1}\n', encoding="utf-8")
        out = tmp_path / "eln.jsonl"
        code = run_cli("eln", "--dataset", str(bad), "--out", str(out), "--dim", "4")
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_transport_error_is_3(self, tmp_path, capsys):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, n=2)
        norm = tmp_path / "norm.jsonl"
        assert run_cli("normalize", "--in", str(dataset), "--out", str(norm)) == 0
        fixture = tmp_path / "fixture.json"
        fixture.write_text("{}", encoding="utf-8")
        out = tmp_path / "corr.jsonl"
        code = run_cli(
            "correct",
            "--dataset", str(norm),
            "--endpoint", "mock",
            "--fixture", str(fixture),
            "--out", str(out),
        )
        assert code == 3

    def test_help_is_0(self):
        assert run_cli("--help") == 0
        assert run_cli("wer", "--help") == 0


class TestNormalizeCommand:
    def test_plain_text(self, tmp_path, capsys):
        src = tmp_path / "lines.txt"
        src.write_text("سلام  ،  دنیا!\nکتاب 12\n", encoding="utf-8")
        out = tmp_path / "norm.txt"
        assert run_cli("normalize", "--in", str(src), "--out", str(out)) == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "سلام دنیا"
        assert lines[1] == "کتاب دوازده"

    def test_jsonl_dataset(self, tmp_path):
        src = tmp_path / "data.jsonl"
        write_dataset(src, n=2)
        out = tmp_path / "norm.jsonl"
        assert run_cli("normalize", "--in", str(src), "--out", str(out)) == 0
        rows = [json.loads(l) for l in out.read_text(encoding="utf-8").splitlines()]
        for row in rows:
            assert row["reference"] == textnorm.normalize(row["reference"])
            assert len(row["hypotheses"]) == 5

    def test_small_number_limit_flag(self, tmp_path):
        src = tmp_path / "lines.txt"
        src.write_text("5\n", encoding="utf-8")
        out = tmp_path / "norm.txt"
        assert run_cli(
            "normalize", "--in", str(src), "--out", str(out), "--small-number-limit", "5"
        ) == 0
        # With the limit at 5 the value is not "small", so it becomes digits.
        assert out.read_text(encoding="utf-8").strip() == "۵"


class TestMixCommand:
    def test_mix(self, tmp_path, capsys):
        clean = make_tone(tmp_path / "c.wav", seconds=0.03)
        (tmp_path / "noise").mkdir()
        make_noise_wav(tmp_path / "noise" / "a.wav", seconds=0.05)
        manifest = tmp_path / "manifest.txt"
        manifest.write_text(str(clean) + "\n", encoding="utf-8")
        out = tmp_path / "mixed"
        code = run_cli(
            "--seed", "3",
            "mix",
            "--clean-manifest", str(manifest),
            "--noise-dir", str(tmp_path / "noise"),
            "--condition", "snr5",
            "--count", "2",
            "--out", str(out),
        )
        assert code == 0
        assert (out / "mix_manifest.jsonl").exists()
        assert "wrote 2 records" in capsys.readouterr().out


def _normalized_dataset(tmp_path):
    src = tmp_path / "data.jsonl"
    write_dataset(src)
    norm = tmp_path / "norm.jsonl"
    assert run_cli("normalize", "--in", str(src), "--out", str(norm)) == 0
    return norm


class TestElnAndProject:
    def test_eln_rows(self, tmp_path):
        norm = _normalized_dataset(tmp_path)
        out = tmp_path / "eln.jsonl"
        code = run_cli(
            "eln", "--dataset", str(norm), "--out", str(out), "--dim", "12", "--token-dim", "6"
        )
        assert code == 0
        rows = [json.loads(l) for l in out.read_text(encoding="utf-8").splitlines()]
        assert len(rows) == 4
        for row in rows:
            assert set(row) == {"id", "magnitude", "sentence_l2", "token_l2", "d", "d_prime"}
            assert row["d"] == 12
            assert row["magnitude"] >= 0.0

    def test_project_from_dumped_vectors(self, tmp_path):
        norm = _normalized_dataset(tmp_path)
        eln_out = tmp_path / "eln.jsonl"
        vectors = str(eln_out) + ".vectors"
        assert run_cli(
            "eln",
            "--dataset", str(norm),
            "--out", str(eln_out),
            "--dim", "6",
            "--token-dim", "4",
            "--dump-vectors", vectors,
        ) == 0
        d_prime = json.loads(eln_out.read_text(encoding="utf-8").splitlines()[0])["d_prime"]
        weights_path = tmp_path / "w.elnp"
        projector.save_weights(
            projector.init_weights([6 + d_prime, 10, 4], seed=2, prefix_len=2), weights_path
        )
        prefix_out = tmp_path / "prefix.elna"
        assert run_cli(
            "project",
            "--eln", str(eln_out),
            "--weights", str(weights_path),
            "--out", str(prefix_out),
        ) == 0
        dim, entries = read_archive(prefix_out)
        assert dim == 4
        assert len(entries) == 4
        header = json.loads((tmp_path / "prefix.elna.json").read_text(encoding="utf-8"))
        assert header["prefix_len"] == 2 and header["llm_dim"] == 2

    def test_project_without_vectors_is_2(self, tmp_path, capsys):
        norm = _normalized_dataset(tmp_path)
        eln_out = tmp_path / "eln.jsonl"
        assert run_cli(
            "eln", "--dataset", str(norm), "--out", str(eln_out), "--dim", "4", "--token-dim", "4"
        ) == 0
        weights_path = tmp_path / "w.elnp"
        projector.save_weights(projector.init_weights([8, 4], seed=1), weights_path)
        code = run_cli(
            "project",
            "--eln", str(eln_out),
            "--weights", str(weights_path),
            "--out", str(tmp_path / "p.elna"),
        )
        assert code == 2
        assert "dump-vectors" in capsys.readouterr().err


class TestCorrectAndWer:
    def test_correct_mock_then_wer(self, tmp_path, capsys):
        norm = _normalized_dataset(tmp_path)
        corr = tmp_path / "corr.jsonl"
        assert run_cli(
            "correct", "--dataset", str(norm), "--endpoint", "mock", "--out", str(corr)
        ) == 0
        per_utt = tmp_path / "per_utt.csv"
        code = run_cli(
            "wer",
            "--ref", str(norm),
            "--hyp", str(corr),
            "--per-utt", str(per_utt),
            "--macro",
        )
        assert code == 0
        output = capsys.readouterr().out
        assert "pooled WER:" in output
        assert "macro WER:" in output
        header = per_utt.read_text(encoding="utf-8").splitlines()[0]
        assert header == "id,S,D,I,N,wer_percent"

    def test_fixture_correction_zero_wer(self, tmp_path, capsys):
        norm = _normalized_dataset(tmp_path)
        fixture = tmp_path / "fixture.json"
        fixture.write_text(
            json.dumps({f"u{i}": REFS[i] for i in range(4)}, ensure_ascii=False),
            encoding="utf-8",
        )
        corr = tmp_path / "corr.jsonl"
        assert run_cli(
            "correct",
            "--dataset", str(norm),
            "--endpoint", "mock",
            "--fixture", str(fixture),
            "--out", str(corr),
        ) == 0
        per_utt = tmp_path / "per_utt.csv"
        assert run_cli(
            "wer", "--ref", str(norm), "--hyp", str(corr), "--per-utt", str(per_utt)
        ) == 0
        assert "pooled WER: 0.0000%" in capsys.readouterr().out


class TestAnalyzeCommand:
    def test_analyze(self, tmp_path):
        norm = _normalized_dataset(tmp_path)
        eln_out = tmp_path / "eln.jsonl"
        assert run_cli(
            "eln", "--dataset", str(norm), "--out", str(eln_out), "--dim", "8", "--token-dim", "4"
        ) == 0
        corr = tmp_path / "corr.jsonl"
        assert run_cli(
            "correct", "--dataset", str(norm), "--endpoint", "mock", "--out", str(corr)
        ) == 0
        per_utt = tmp_path / "per_utt.csv"
        assert run_cli(
            "wer", "--ref", str(norm), "--hyp", str(corr), "--per-utt", str(per_utt)
        ) == 0
        report = tmp_path / "report"
        code = run_cli(
            "analyze",
            "--wer", str(per_utt),
            "--eln", str(eln_out),
            "--dataset", str(norm),
            "--out", str(report),
        )
        assert code == 0
        table = (report / "table.csv").read_text(encoding="utf-8").splitlines()
        assert table[0] == "system,clean,mixed,snr5,snr10"
        assert table[1].startswith("corrected,")
        study = json.loads((report / "study.json").read_text(encoding="utf-8"))
        assert study["count"] == 4
        assert "bins" in study


class TestRunCommand:
    def test_run_and_rerun(self, tmp_path, capsys):
        cfg = small_config(tmp_path)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg.to_json()), encoding="utf-8")
        assert run_cli("run", "--config", str(cfg_path)) == 0
        first = capsys.readouterr().out
        assert "ran: normalize, eln, correct, wer, analyze" in first
        assert run_cli("run", "--config", str(cfg_path)) == 0
        second = capsys.readouterr().out
        assert "ran: (nothing)" in second
        assert "skipped: normalize, eln, correct, wer, analyze" in second

    def test_global_config_flag(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg.to_json()), encoding="utf-8")
        assert run_cli("--config", str(cfg_path), "run") == 0

    def test_run_without_config_is_1(self, capsys):
        assert run_cli("run") == 1

    def test_seed_override_via_global_flag(self, tmp_path, capsys):
        cfg = small_config(tmp_path)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg.to_json()), encoding="utf-8")
        assert run_cli("run", "--config", str(cfg_path)) == 0
        hash_a = capsys.readouterr().out.splitlines()[-1]
        assert run_cli("--seed", "99", "run", "--config", str(cfg_path)) == 0
        hash_b = capsys.readouterr().out.splitlines()[-1]
        assert hash_a != hash_b
