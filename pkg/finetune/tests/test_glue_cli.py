from __future__ import annotations

import pytest

from finetune_glue.cli import main


def test_train_then_export(sft_file, tmp_path, capsys):
    code = main([
        "train",
        "--train", str(sft_file),
        "--out", str(tmp_path / "run"),
        "--base-model", "micro-byte-lm",
        "--max-steps", "5",
        "--checkpoint-every", "5",
        "--batch-size", "2",
        "--source-max-len", "80",
        "--target-max-len", "80",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "loss " in out and "checkpoint:" in out
    assert (tmp_path / "run" / "loss.csv").exists()

    code = main([
        "export",
        "--checkpoint", str(tmp_path / "run" / "checkpoint-5"),
        "--out", str(tmp_path / "art"),
        "--int8",
    ])
    assert code == 0
    assert (tmp_path / "art" / "model-int8.pt").exists()
    assert (tmp_path / "art" / "serve.md").exists()


def test_unknown_base_model_is_usage_error(sft_file, tmp_path, capsys):
    code = main([
        "train", "--train", str(sft_file), "--out", str(tmp_path),
        "--base-model", "gpt-17",
    ])
    assert code == 2
    assert "usage error" in capsys.readouterr().err


def test_missing_train_file_is_io_error(tmp_path, capsys):
    code = main(["train", "--train", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)])
    assert code == 3


def test_schema_mismatch_exit_code(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n", encoding="utf-8")
    code = main([
        "train", "--train", str(bad), "--out", str(tmp_path / "run"),
        "--base-model", "micro-byte-lm", "--max-steps", "1", "--checkpoint-every", "1",
    ])
    assert code == 1


def test_export_missing_checkpoint_exit_code(tmp_path, capsys):
    code = main(["export", "--checkpoint", str(tmp_path / "ghost")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
