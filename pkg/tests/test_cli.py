"""End-to-end exercises of the command-line surface, run in process."""
from __future__ import annotations

import json
import re

import pytest

from fivew1h.cli import main
from fivew1h.corpus import load_split, save_corpus
from helpers import make_record


def run_cli(*argv: str) -> int:
    return main(list(argv))


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        run_cli()
    assert err.value.code == 2


def test_unknown_flag_is_usage_error(fixtures_dir):
    with pytest.raises(SystemExit) as err:
        run_cli(
            "validate",
            "--corpus", str(fixtures_dir / "cnndm_sample.jsonl"),
            "--dataset", "cnndm",
            "--frobnicate",
        )
    assert err.value.code == 2


def test_bad_ratio_rejected_before_any_work(fixtures_dir, tmp_path):
    with pytest.raises(SystemExit) as err:
        run_cli(
            "split",
            "--corpus", str(fixtures_dir / "cnndm_sample.jsonl"),
            "--dataset", "cnndm",
            "--out", str(tmp_path),
            "--ratios", "0.5,0.4,0.2",
        )
    assert err.value.code == 2


def test_bad_dataset_tag_is_usage_error(fixtures_dir):
    with pytest.raises(SystemExit) as err:
        run_cli(
            "stats",
            "--corpus", str(fixtures_dir / "cnndm_sample.jsonl"),
            "--dataset", "gigaword",
        )
    assert err.value.code == 2


def test_validate_clean_corpus(fixtures_dir, tmp_path, capsys):
    code = run_cli(
        "validate",
        "--corpus", str(fixtures_dir / "cnndm_sample.jsonl"),
        "--dataset", "cnndm",
        "--out", str(tmp_path),
    )
    assert code == 0
    assert capsys.readouterr().out.startswith("PASS")
    report = read_json(tmp_path / "validation.json")
    assert report["passed"] is True
    assert report["record_count"] == 100


def test_validate_planted_violations(fixtures_dir, tmp_path, capsys):
    code = run_cli(
        "validate",
        "--corpus", str(fixtures_dir / "planted_violations.jsonl"),
        "--dataset", "cnndm",
        "--out", str(tmp_path),
    )
    assert code == 1
    assert capsys.readouterr().out.startswith("FAIL")
    report = read_json(tmp_path / "validation.json")
    assert report["passed"] is False
    assert report["counts_by_kind"] == {
        "VerbatimViolation": 1,
        "UniquenessViolation": 2,
    }


def test_validate_strict_escalates_warnings(tmp_path):
    record = make_record("warn-1", what=["alpha beta", "alpha beta"], who=["gamma"])
    corpus = tmp_path / "corpus.jsonl"
    save_corpus([record], corpus)
    lenient = run_cli("validate", "--corpus", str(corpus), "--dataset", "cnndm")
    strict = run_cli(
        "validate", "--corpus", str(corpus), "--dataset", "cnndm", "--strict"
    )
    assert lenient == 0
    assert strict == 1


def test_validate_missing_file_is_io_error(tmp_path, capsys):
    code = run_cli(
        "validate", "--corpus", str(tmp_path / "absent.jsonl"), "--dataset", "cnndm"
    )
    assert code == 3
    assert "error" in capsys.readouterr().err


def test_stats_reports_reference_mean(fixtures_dir, capsys):
    code = run_cli(
        "stats",
        "--corpus", str(fixtures_dir / "cnndm_sample.jsonl"),
        "--dataset", "cnndm",
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["record_count"] == 100
    assert payload["mean_words"] == pytest.approx(579.0)
    assert payload["reference_mean_words"] == 579
    assert payload["per_element"]["what"] >= 100


def test_split_floor_counts_manifest_and_idempotence(fixtures_dir, tmp_path, capsys):
    argv = [
        "split",
        "--corpus", str(fixtures_dir / "cnndm_sample.jsonl"),
        "--dataset", "cnndm",
        "--out", str(tmp_path),
        "--seed", "13",
    ]
    assert run_cli(*argv) == 0
    split = load_split(tmp_path / "split.json")
    assert (len(split.train), len(split.validation), len(split.test)) == (80, 10, 10)
    assert split.seed == 13

    manifest = read_json(tmp_path / "manifest.json")
    assert manifest["subcommand"] == "split"
    assert manifest["seed"] == 13
    assert re.fullmatch(r"[0-9a-f]{64}", manifest["config_hash"])
    assert str(tmp_path / "split.json") in manifest["outputs"]

    capsys.readouterr()
    assert run_cli(*argv) == 0
    assert "already exists" in capsys.readouterr().out

    before = (tmp_path / "split.json").read_text()
    assert run_cli(*argv, "--force") == 0
    assert (tmp_path / "split.json").read_text() == before


def test_config_file_loses_to_flags(fixtures_dir, tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("seed = 9\n# comment line\nratios = 0.8,0.1,0.1\n")
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    base = [
        "split",
        "--corpus", str(fixtures_dir / "cnndm_sample.jsonl"),
        "--dataset", "cnndm",
        "--config", str(config),
    ]
    assert run_cli(*base, "--out", str(out_a)) == 0
    assert load_split(out_a / "split.json").seed == 9
    assert run_cli(*base, "--out", str(out_b), "--seed", "7") == 0
    assert load_split(out_b / "split.json").seed == 7


def test_export_sft_writes_train_records(fixtures_dir, tmp_path):
    corpus = str(fixtures_dir / "cnndm_sample.jsonl")
    assert run_cli(
        "split", "--corpus", corpus, "--dataset", "cnndm", "--out", str(tmp_path)
    ) == 0
    assert run_cli(
        "export-sft",
        "--corpus", corpus,
        "--dataset", "cnndm",
        "--split", str(tmp_path / "split.json"),
        "--subset", "train",
        "--out", str(tmp_path),
    ) == 0
    lines = (tmp_path / "sft_train.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 80
    first = json.loads(lines[0])
    assert set(first) == {"instruction", "input", "output"}
    assert json.loads(first["output"])  # output is an element map


def test_offline_chain_and_artifacts(fixtures_dir, tmp_path, capsys):
    """run (replay) -> parse -> score -> report over the bundled fixture."""
    corpus = str(fixtures_dir / "cnndm_sample.jsonl")
    split_dir = tmp_path / "split"
    run_dir = tmp_path / "run"
    parse_dir = tmp_path / "parse"
    score_dir = tmp_path / "score"
    report_dir = tmp_path / "report"

    assert run_cli(
        "split", "--corpus", corpus, "--dataset", "cnndm", "--out", str(split_dir)
    ) == 0
    assert run_cli(
        "run",
        "--corpus", corpus,
        "--dataset", "cnndm",
        "--split", str(split_dir / "split.json"),
        "--subset", "all",
        "--replay", str(fixtures_dir / "replay_cnndm.json"),
        "--out", str(run_dir),
    ) == 0
    log_lines = (run_dir / "run.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(log_lines) == 100
    first = json.loads(log_lines[0])
    assert first["timestamp"] == "1970-01-01T00:00:00Z"
    assert first["latency_s"] == 0.0

    assert run_cli(
        "parse", "--run", str(run_dir / "run.jsonl"), "--out", str(parse_dir)
    ) == 0

    assert run_cli(
        "score",
        "--parsed", str(parse_dir / "parsed.jsonl"),
        "--corpus", corpus,
        "--dataset", "cnndm",
        "--out", str(score_dir),
    ) == 0
    score_lines = (score_dir / "scores.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(score_lines) == 100
    row = json.loads(score_lines[0])
    assert set(row["elements"]) == {"what", "when", "where", "why", "who", "how"}
    assert "rouge1_f" in row["elements"]["what"]

    capsys.readouterr()
    assert run_cli(
        "report",
        "--parsed", str(parse_dir / "parsed.jsonl"),
        "--corpus", corpus,
        "--dataset", "cnndm",
        "--out", str(report_dir),
        "--run-id", "run",
        "--model-id", "replay-demo",
    ) == 0
    printed = capsys.readouterr().out
    assert "valid count > 80 (absolute)" in printed
    for name in ("report.md", "report.csv", "report.json", "valid_counts.csv"):
        assert (report_dir / name).exists()
    counts = (report_dir / "valid_counts.csv").read_text(encoding="utf-8").splitlines()
    assert counts[1] == "replay-demo,100,95,79,90,98,85"


def test_run_requires_replay_or_endpoint(fixtures_dir, tmp_path):
    with pytest.raises(SystemExit) as err:
        run_cli(
            "run",
            "--corpus", str(fixtures_dir / "cnndm_sample.jsonl"),
            "--dataset", "cnndm",
            "--split", str(tmp_path / "split.json"),
            "--out", str(tmp_path),
        )
    assert err.value.code == 2


def test_run_replay_missing_article_fails_with_io_exit(fixtures_dir, tmp_path, capsys):
    corpus = str(fixtures_dir / "cnndm_sample.jsonl")
    split_dir = tmp_path / "split"
    assert run_cli(
        "split", "--corpus", corpus, "--dataset", "cnndm", "--out", str(split_dir)
    ) == 0
    fixture = json.loads((fixtures_dir / "replay_cnndm.json").read_text())
    fixture.pop(sorted(fixture)[0])
    short = tmp_path / "short.json"
    short.write_text(json.dumps(fixture), encoding="utf-8")
    code = run_cli(
        "run",
        "--corpus", corpus,
        "--dataset", "cnndm",
        "--split", str(split_dir / "split.json"),
        "--subset", "all",
        "--replay", str(short),
        "--out", str(tmp_path / "run"),
    )
    assert code == 3
    assert "FixtureMissingArticle" in capsys.readouterr().err
    # The other 99 responses still land in the log.
    lines = (tmp_path / "run" / "run.jsonl").read_text().splitlines()
    assert len(lines) == 99


def test_score_debug_pair(capsys):
    code = run_cli(
        "score", "--prediction", "the cat sat", "--reference", "the cat sat"
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["rouge1_f"] == pytest.approx(1.0)
    assert payload["bleu4"] == pytest.approx(1.0)
    assert 0.0 <= payload["rouge2_f"] <= 1.0


def test_score_debug_requires_both_strings(capsys):
    code = run_cli("score", "--prediction", "only one side")
    assert code == 2
    assert "usage error" in capsys.readouterr().err


def test_transfer_cli_grid(fixtures_dir, tmp_path, capsys):
    corpus = str(fixtures_dir / "xsum_sample.jsonl")
    split_dir = tmp_path / "split"
    assert run_cli(
        "split", "--corpus", corpus, "--dataset", "xsum", "--out", str(split_dir)
    ) == 0

    reports = []
    for tag, replay, train in (
        ("indomain", "replay_xsum_indomain.json", "xsum"),
        ("cnnft", "replay_xsum_cnnft.json", "cnndm"),
    ):
        run_dir = tmp_path / f"run-{tag}"
        parse_dir = tmp_path / f"parse-{tag}"
        report_dir = tmp_path / f"report-{tag}"
        assert run_cli(
            "run",
            "--corpus", corpus,
            "--dataset", "xsum",
            "--split", str(split_dir / "split.json"),
            "--subset", "all",
            "--replay", str(fixtures_dir / replay),
            "--out", str(run_dir),
        ) == 0
        assert run_cli(
            "parse", "--run", str(run_dir / "run.jsonl"), "--out", str(parse_dir)
        ) == 0
        assert run_cli(
            "report",
            "--parsed", str(parse_dir / "parsed.jsonl"),
            "--corpus", corpus,
            "--dataset", "xsum",
            "--out", str(report_dir),
            "--threshold", "10",
            "--run-id", tag,
            "--model-id", tag,
            "--train-dataset", train,
        ) == 0
        reports.append(str(report_dir / "report.json"))

    capsys.readouterr()
    grid_dir = tmp_path / "grid"
    code = run_cli(
        "transfer",
        "--report", reports[0],
        "--report", reports[1],
        "--out", str(grid_dir),
    )
    assert code == 0
    table = (grid_dir / "transfer.md").read_text(encoding="utf-8")
    rows = [line for line in table.splitlines() if line.startswith("| XSum")]
    assert rows[0].startswith("| XSum(in-domain) |")
    assert rows[1].startswith("| XSum(CNN fine-tune) |")
    assert "**" in table


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as err:
        run_cli("--version")
    assert err.value.code == 0
    assert "fivew1h" in capsys.readouterr().out
