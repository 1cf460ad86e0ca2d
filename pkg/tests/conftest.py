from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN


# One human-readable verdict line per acceptance criterion, printed after the
# run so the pass/fail state of each is visible at a glance.
ACCEPTANCE_CRITERIA = {
    "test_metric_oracle_suite": (
        "metric oracle suite: rouge_n/rouge_l/bleu4 match independent brute-force "
        "oracles within 1e-9 on 1,000 randomized pairs (lengths 0-40); ROUGE-L matches "
        "exhaustive subsequence enumeration for lengths <= 8; runtime < 30 s"
    ),
    "test_metric_identities": (
        "metric identities: score(s,s) = 1 exactly for all metrics on 200 random "
        "sequences with |s| >= 4; precision/recall swap symmetry holds exactly"
    ),
    "test_derived_worked_examples": (
        "worked examples: 'the cat sat on the mat' vs 'the cat is on the mat' gives "
        "ROUGE-1 F1 = ROUGE-L F1 = 5/6; 'the the the the' vs 'the cat' gives modified "
        "unigram precision 0.25 (frozen pre-build, tolerance 1e-12)"
    ),
    "test_annotation_invariants": (
        "annotation invariants: planted fixture yields exactly 1 verbatim + 2 "
        "uniqueness violations; 100% precision/recall on planted faults across 50 "
        "randomized fixtures"
    ),
    "test_end_to_end_determinism": (
        "end-to-end determinism: validate->split(seed 7)->export-sft->run(replay, "
        "100 articles)->parse->score->report is byte-identical across two runs and "
        "matches the committed golden report.csv; runtime < 10 s"
    ),
    "test_table_shape_reproduction": (
        "table shape: the element with 79/100 valid responses renders as an em dash "
        "under threshold 80, and valid_counts.csv equals the planted counts exactly"
    ),
    "test_split_contract": (
        "split contract: 1000 records -> 800/100/100 disjoint; with 450 merge-extra "
        "records -> 1250/100/100 with extras confined to train"
    ),
    "test_parser_robustness": (
        "parser robustness: zero crashes over 10,000 fuzzed responses; the three "
        "observed response styles (canonical JSON, key-line prose, quoted-key block) "
        "parse with the expected modes and validity flags"
    ),
    "test_truncation": (
        "truncation: a 900-token article truncates to exactly 750 tokens; truncation "
        "is idempotent over 500 random strings"
    ),
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = []
    for status, outcome in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(status, []):
            if getattr(report, "when", "call") != "call" and status == "passed":
                continue
            name = report.nodeid.split("::")[-1]
            if "test_acceptance" in report.nodeid and name in ACCEPTANCE_CRITERIA:
                verdicts.append((name, f"{outcome}: {ACCEPTANCE_CRITERIA[name]}"))
    if verdicts:
        order = list(ACCEPTANCE_CRITERIA)
        verdicts.sort(key=lambda pair: order.index(pair[0]))
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in verdicts:
            terminalreporter.write_line(line)
