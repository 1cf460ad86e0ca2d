#!/usr/bin/env python3
"""Run the whole pipeline against the bundled replay fixture.

No network access is needed: responses come from fixtures/replay_cnndm.json,
so the resulting report is byte-reproducible. Useful as a smoke test and as a
copy-paste source for the real thing (swap --replay for --endpoint-config).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from fivew1h.cli import main as cli

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def step(*argv: str) -> None:
    code = cli(list(argv))
    if code != 0:
        print(f"step failed with exit {code}: {' '.join(argv)}", file=sys.stderr)
        raise SystemExit(code)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="offline_eval", help="output directory")
    parser.add_argument("--corpus", default=str(FIXTURES / "cnndm_sample.jsonl"))
    parser.add_argument("--replay", default=str(FIXTURES / "replay_cnndm.json"))
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out)
    corpus = ["--corpus", args.corpus, "--dataset", "cnndm"]

    step("validate", *corpus)
    step("split", *corpus, "--out", str(out / "split"), "--seed", str(args.seed))
    split = str(out / "split" / "split.json")
    step("export-sft", *corpus, "--split", split, "--subset", "train",
         "--out", str(out / "sft"))
    step("run", *corpus, "--split", split, "--subset", "all",
         "--replay", args.replay, "--out", str(out / "run"))
    step("parse", "--run", str(out / "run" / "run.jsonl"), "--out", str(out / "parse"))
    step("score", "--parsed", str(out / "parse" / "parsed.jsonl"), *corpus,
         "--out", str(out / "score"))
    step("report", "--parsed", str(out / "parse" / "parsed.jsonl"), *corpus,
         "--out", str(out / "report"), "--run-id", "offline", "--model-id", "replay-demo")

    print(f"\nartifacts under {out}/ — table: {out / 'report' / 'report.md'}")


if __name__ == "__main__":
    main()
