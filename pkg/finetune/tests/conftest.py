from __future__ import annotations

import json

import pytest

ELEMENT_KEYS = ("what", "when", "where", "why", "who", "how")

INSTRUCTION = "Please extract What, When, Where, Why, Who, and How from the news."


def _record(index: int) -> dict:
    elements = {key: [] for key in ELEMENT_KEYS}
    elements["what"] = [f"event {index} happened"]
    elements["who"] = [f"person {index}"]
    return {
        "instruction": INSTRUCTION,
        "input": f"Article {index}: person {index} reported that event {index} "
        f"happened downtown on day {index}.",
        "output": json.dumps(elements, ensure_ascii=False),
    }


@pytest.fixture(scope="session")
def sft_file(tmp_path_factory):
    """Eight records in the exported instruction-record schema."""
    path = tmp_path_factory.mktemp("sft") / "train.jsonl"
    with path.open("w", encoding="utf-8") as handle:
        for index in range(8):
            handle.write(json.dumps(_record(index), ensure_ascii=False) + "\n")
    return path


# Verdict line for the one secondary guarantee, printed after each run just
# like the primary suite does for its criteria.
SECONDARY_CRITERIA = {
    "test_smoke_run": (
        "fine-tune smoke: tiny base model, 8 records, 10 steps -> checkpoint "
        "written, final loss <= initial loss, loss.csv has 10 rows"
    ),
    "test_checkpoint_schedule": (
        "schedule: checkpoint_every 500 with max_steps 1000 -> checkpoints at "
        "exactly steps 500 and 1000"
    ),
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = []
    for status, outcome in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(status, []):
            name = report.nodeid.split("::")[-1]
            if "test_glue_train" in report.nodeid and name in SECONDARY_CRITERIA:
                verdicts.append((name, f"{outcome}: {SECONDARY_CRITERIA[name]}"))
    if verdicts:
        order = list(SECONDARY_CRITERIA)
        verdicts.sort(key=lambda pair: order.index(pair[0]))
        terminalreporter.write_sep("=", "secondary acceptance")
        for _, line in verdicts:
            terminalreporter.write_line(line)
