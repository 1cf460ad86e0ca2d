#!/usr/bin/env python3
"""Build a small cross-dataset transfer grid from the bundled XSum fixtures.

Two replay runs over the same evaluation corpus — one tagged as in-domain,
one as a model fine-tuned on CNN/DM — are aggregated and laid out side by
side, with the best score per element bolded within the evaluation group.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from fivew1h.cli import main as cli

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

RUNS = (
    ("indomain", "replay_xsum_indomain.json", "xsum"),
    ("cnnft", "replay_xsum_cnnft.json", "cnndm"),
)


def step(*argv: str) -> None:
    code = cli(list(argv))
    if code != 0:
        print(f"step failed with exit {code}: {' '.join(argv)}", file=sys.stderr)
        raise SystemExit(code)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="transfer_demo", help="output directory")
    args = parser.parse_args()

    out = Path(args.out)
    corpus = ["--corpus", str(FIXTURES / "xsum_sample.jsonl"), "--dataset", "xsum"]
    step("split", *corpus, "--out", str(out / "split"))
    split = str(out / "split" / "split.json")

    reports = []
    for tag, replay, train in RUNS:
        step("run", *corpus, "--split", split, "--subset", "all",
             "--replay", str(FIXTURES / replay), "--out", str(out / f"run-{tag}"))
        step("parse", "--run", str(out / f"run-{tag}" / "run.jsonl"),
             "--out", str(out / f"parse-{tag}"))
        step("report", "--parsed", str(out / f"parse-{tag}" / "parsed.jsonl"), *corpus,
             "--out", str(out / f"report-{tag}"), "--threshold", "10",
             "--run-id", tag, "--model-id", tag, "--train-dataset", train)
        reports.append(str(out / f"report-{tag}" / "report.json"))

    step("transfer", "--report", reports[0], "--report", reports[1],
         "--out", str(out / "grid"))
    print(f"\ngrid written to {out / 'grid' / 'transfer.md'}")


if __name__ == "__main__":
    main()
