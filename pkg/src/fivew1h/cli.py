"""Command-line entry point wiring the pipeline stages into subcommands.

Every file-producing subcommand writes a run manifest (effective config, its
hash, input/output paths, seed, timestamps) next to its outputs, skips work
when the outputs already exist unless --force, and honors the precedence
flags > config file > built-in defaults. Exit codes: 0 success, 1 validation
failure, 2 usage error, 3 I/O or endpoint failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
import time
from pathlib import Path

from . import __version__
from .corpus import (
    AnnotationRecord,
    DatasetId,
    REFERENCE_MEAN_WORDS,
    corpus_stats,
    load_corpus,
    load_split,
    save_split,
    split_dataset,
)
from .elements import ELEMENT_ORDER
from .errors import IoFailure, ToolkitError
from .gateway import (
    DecodingParams,
    EndpointRegistry,
    EndpointUnreachable,
    ExtractionRequest,
    FixtureMissingArticle,
    RateLimited,
    load_endpoint_config,
    load_run_log,
    replay_backend,
    run_batch,
)
from .metrics import ScoreMode, score_element
from .parsing import (
    load_parsed,
    mode_summary,
    parse_response,
    save_parsed,
    validity_summary,
)
from .prompting import PromptMode, PromptSpec, build_prompt, load_template
from .report import (
    aggregate,
    load_report,
    render_table,
    render_transfer,
    transfer_matrix,
    write_valid_counts,
)
from .sft import DEFAULT_INSTRUCTION, DEFAULT_TRUNCATION_LIMIT, export_sft
from .validation import ValidationPolicy, validate_corpus

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_IO = 3

_MANIFEST_NAME = "manifest.json"


# ---------------------------------------------------------------- arg types


def _ratio_triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated ratios, got {text!r}")
    try:
        a, b, c = (float(part) for part in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratios must be numbers, got {text!r}") from None
    if abs((a + b + c) - 1.0) > 1e-9:
        raise argparse.ArgumentTypeError(f"ratios must sum to 1.0, got {text!r}")
    return (a, b, c)


def _threshold_value(text: str):
    """An integer is an absolute count; a decimal in (0,1) is a fraction."""
    if re.fullmatch(r"[+-]?\d+", text):
        return int(text)
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threshold must be a number, got {text!r}") from None
    if not (0.0 < value < 1.0):
        raise argparse.ArgumentTypeError(
            f"fractional threshold must lie in (0, 1), got {text!r}"
        )
    return value


def _dataset_tag(text: str) -> DatasetId:
    try:
        return DatasetId.from_tag(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# ------------------------------------------------------------- config file


def load_config_file(path: str | Path) -> dict[str, str]:
    """Plain `key = value` lines; blank lines and #-comments ignored."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read config file {path}: {exc}") from exc
    config: dict[str, str] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise IoFailure(f"{path}:{number}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        config[key.strip()] = value.strip()
    return config


class _Config:
    """Resolves option values with precedence: flag > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self.file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
        self.effective: dict = {}

    def get(self, flag_value, key: str, default, cast=str):
        if flag_value is not None:
            value = flag_value
        elif key in self.file_values:
            value = cast(self.file_values[key])
        else:
            value = default
        self.effective[key] = value
        return value


def _config_hash(effective: dict) -> str:
    canon = json.dumps(effective, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def write_manifest(
    out_dir: Path,
    subcommand: str,
    config: dict,
    inputs: list[Path],
    outputs: list[Path],
    seed: int | None,
    started: str,
) -> Path:
    manifest = {
        "tool": "fivew1h",
        "version": __version__,
        "subcommand": subcommand,
        "config": {key: str(value) for key, value in sorted(config.items())},
        "config_hash": _config_hash(config),
        "inputs": [str(path) for path in inputs],
        "outputs": [str(path) for path in outputs],
        "seed": seed,
        "started": started,
        "finished": _utc_now(),
    }
    path = out_dir / _MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _outputs_ready(out: Path, targets: list[Path], force: bool) -> bool:
    if force:
        return False
    return all(path.exists() for path in targets) and (out / _MANIFEST_NAME).exists()


# ------------------------------------------------------------- subcommands


def _cmd_validate(args) -> int:
    records = load_corpus(args.corpus, args.dataset)
    policy = ValidationPolicy(allow_all_empty=args.allow_all_empty)
    report = validate_corpus(records, policy)
    blocking = [issue for issue in report.issues if issue.blocking]
    print(report.to_text())
    if args.out:
        started = _utc_now()
        out = _prepare_out(args)
        target = out / "validation.json"
        target.write_text(report.to_json() + "\n", encoding="utf-8")
        write_manifest(
            out,
            "validate",
            {"corpus": args.corpus, "dataset": args.dataset.value},
            [Path(args.corpus)],
            [target],
            None,
            started,
        )
    if blocking or (args.strict and report.issues):
        return EXIT_VALIDATION
    return EXIT_OK


def _cmd_stats(args) -> int:
    records = load_corpus(args.corpus, args.dataset)
    stats = corpus_stats(records)
    reference = REFERENCE_MEAN_WORDS[args.dataset]
    payload = {
        "dataset": args.dataset.value,
        "record_count": stats.record_count,
        "span_count": stats.span_count,
        "mean_words": stats.mean_words,
        "mean_words_rounded": stats.mean_words_display,
        "reference_mean_words": reference,
        "per_element": {kind.value: stats.per_element[kind] for kind in ELEMENT_ORDER},
        "per_category": {
            category.display_name: count for category, count in stats.per_category.items()
        },
    }
    print(json.dumps(payload, ensure_ascii=False, indent=2))
    if args.out:
        started = _utc_now()
        out = _prepare_out(args)
        target = out / "stats.json"
        target.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", "utf-8")
        write_manifest(
            out,
            "stats",
            {"corpus": args.corpus, "dataset": args.dataset.value},
            [Path(args.corpus)],
            [target],
            None,
            started,
        )
    return EXIT_OK


def _cmd_split(args) -> int:
    started = _utc_now()
    config = _Config(args)
    seed = config.get(args.seed, "seed", 0, int)
    ratios = config.get(args.ratios, "ratios", (0.8, 0.1, 0.1), _ratio_triple)

    out = _prepare_out(args)
    target = out / "split.json"
    if _outputs_ready(out, [target], args.force):
        print(f"{target} already exists; use --force to rebuild")
        return EXIT_OK

    records = load_corpus(args.corpus, args.dataset)
    extra = load_corpus(args.extra, args.extra_dataset) if args.extra else None
    split = split_dataset(records, ratios=ratios, seed=seed, merge_extra=extra)
    save_split(split, target)
    print(
        f"split written: train={len(split.train)} validation={len(split.validation)} "
        f"test={len(split.test)} (seed {seed})"
    )
    inputs = [Path(args.corpus)] + ([Path(args.extra)] if args.extra else [])
    config.effective.update(
        corpus=args.corpus, dataset=args.dataset.value, extra=args.extra or ""
    )
    write_manifest(out, "split", config.effective, inputs, [target], seed, started)
    return EXIT_OK


def _subset_records(args, subset: str) -> tuple[list[AnnotationRecord], list[Path]]:
    """Records for one split subset in split-file order; "all" means the
    whole corpus in file order."""
    records = load_corpus(args.corpus, args.dataset)
    inputs = [Path(args.corpus), Path(args.split)]
    extra = []
    if getattr(args, "extra", None):
        extra = load_corpus(args.extra, args.extra_dataset)
        inputs.append(Path(args.extra))
    if subset == "all":
        return records + extra, inputs
    by_id = {record.id: record for record in records}
    for record in extra:
        by_id[record.id] = record
    split = load_split(args.split)
    ids = getattr(split, subset)
    missing = [article_id for article_id in ids if article_id not in by_id]
    if missing:
        raise IoFailure(
            f"split subset {subset!r} names ids absent from the corpus: {missing[:5]}"
        )
    return [by_id[article_id] for article_id in ids], inputs


def _cmd_export_sft(args) -> int:
    started = _utc_now()
    config = _Config(args)
    limit = config.get(args.limit, "limit", DEFAULT_TRUNCATION_LIMIT, int)
    instruction = config.get(args.instruction, "instruction", DEFAULT_INSTRUCTION)
    subset = config.get(args.subset, "subset", "train")

    out = _prepare_out(args)
    target = out / f"sft_{subset}.jsonl"
    if _outputs_ready(out, [target], args.force):
        print(f"{target} already exists; use --force to rebuild")
        return EXIT_OK

    records, inputs = _subset_records(args, subset)
    result = export_sft(records, target, instruction=instruction, limit=limit)
    print(f"wrote {result.written} SFT records to {target}")
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    config.effective.update(
        corpus=args.corpus, dataset=args.dataset.value, split=args.split
    )
    write_manifest(out, "export-sft", config.effective, inputs, [target], None, started)
    return EXIT_OK


def _cmd_run(args) -> int:
    started = _utc_now()
    config = _Config(args)
    mode = PromptMode(config.get(args.mode, "mode", "zero-shot"))
    shots = config.get(args.shots, "shots", 5, int)
    seed = config.get(args.seed, "seed", 0, int)
    limit = config.get(args.limit, "limit", DEFAULT_TRUNCATION_LIMIT, int)
    subset = config.get(args.subset, "subset", "test")
    top_p = config.get(args.top_p, "top_p", 0.95, float)
    temperature = config.get(args.temperature, "temperature", 0.7, float)
    max_tokens = config.get(args.max_tokens, "max_tokens", 2000, int)
    max_in_flight = config.get(args.max_in_flight, "max_in_flight", 4, int)

    out = _prepare_out(args)
    target = out / "run.jsonl"
    if args.force and target.exists():
        target.unlink()

    registry = EndpointRegistry()
    if args.replay:
        endpoint = replay_backend(args.replay, registry)
    else:
        endpoint = load_endpoint_config(args.endpoint_config, registry)

    targets, inputs = _subset_records(args, subset)
    train_records, _ = _subset_records(args, "train")
    spec_kwargs = dict(
        mode=mode,
        shots=shots,
        exemplar_seed=seed,
        truncation_limit=limit,
    )
    if args.template:
        spec_kwargs["template"] = load_template(args.template)
        inputs.append(Path(args.template))
    spec = PromptSpec(**spec_kwargs)
    params = DecodingParams(top_p=top_p, temperature=temperature, max_tokens=max_tokens)

    requests_ = [
        ExtractionRequest(
            article_id=record.id,
            prompt=build_prompt(spec, record.article, train_records),
            endpoint=endpoint,
            params=params,
        )
        for record in targets
    ]
    manifest = run_batch(requests_, target, max_in_flight=max_in_flight, registry=registry)
    print(
        f"batch done: {manifest.completed} completed, {manifest.skipped} skipped, "
        f"{manifest.failed} failed (log: {target})"
    )
    for name, count in sorted(manifest.error_counts.items()):
        print(f"  {name}: {count}", file=sys.stderr)
    config.effective.update(
        corpus=args.corpus,
        dataset=args.dataset.value,
        split=args.split,
        endpoint=endpoint,
    )
    inputs.append(Path(args.replay or args.endpoint_config))
    write_manifest(out, "run", config.effective, inputs, [target], seed, started)
    return EXIT_IO if manifest.failed else EXIT_OK


def _cmd_parse(args) -> int:
    started = _utc_now()
    out = _prepare_out(args)
    target = out / "parsed.jsonl"
    if _outputs_ready(out, [target], args.force):
        print(f"{target} already exists; use --force to rebuild")
        return EXIT_OK

    responses = load_run_log(args.run)
    parsed = [parse_response(response) for response in responses]
    save_parsed(parsed, target)
    print(f"parsed {len(parsed)} responses to {target}")
    print("modes:", json.dumps(mode_summary(parsed)))
    print("valid:", json.dumps(validity_summary(parsed)))
    write_manifest(
        out, "parse", {"run": args.run}, [Path(args.run)], [target], None, started
    )
    return EXIT_OK


def _cmd_score(args) -> int:
    started = _utc_now()
    config = _Config(args)
    mode = ScoreMode(config.get(args.score_mode, "score_mode", "concat"))

    if args.prediction is not None or args.reference is not None:
        if args.prediction is None or args.reference is None:
            raise argparse.ArgumentTypeError(
                "--prediction and --reference must be given together"
            )
        scores = score_element([args.prediction], [args.reference], mode)
        print(json.dumps(scores.as_flat_dict(), indent=2))
        return EXIT_OK

    if not (args.parsed and args.corpus and args.dataset and args.out):
        raise argparse.ArgumentTypeError(
            "batch scoring needs --parsed, --corpus, --dataset, and --out"
        )
    out = _prepare_out(args)
    target = out / "scores.jsonl"
    if _outputs_ready(out, [target], args.force):
        print(f"{target} already exists; use --force to rebuild")
        return EXIT_OK

    parsed = load_parsed(args.parsed)
    gold = {record.id: record for record in load_corpus(args.corpus, args.dataset)}
    with target.open("w", encoding="utf-8") as handle:
        for item in parsed:
            if item.article_id not in gold:
                raise ToolkitError(f"parsed id {item.article_id!r} has no gold record")
            row = {"article_id": item.article_id, "mode": item.mode.value, "elements": {}}
            for kind in ELEMENT_ORDER:
                scores = score_element(
                    item.elements[kind], gold[item.article_id].elements[kind], mode
                )
                row["elements"][kind.value] = scores.as_flat_dict()
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"scored {len(parsed)} responses to {target}")
    config.effective.update(parsed=args.parsed, corpus=args.corpus)
    write_manifest(
        out,
        "score",
        config.effective,
        [Path(args.parsed), Path(args.corpus)],
        [target],
        None,
        started,
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    started = _utc_now()
    config = _Config(args)
    threshold = config.get(args.threshold, "threshold", 80, _threshold_value)
    mode = ScoreMode(config.get(args.score_mode, "score_mode", "concat"))
    include_invalid = args.include_invalid or config.file_values.get(
        "include_invalid", ""
    ).lower() in {"1", "true", "yes"}
    config.effective["include_invalid"] = include_invalid

    out = _prepare_out(args)
    targets = [out / name for name in ("report.md", "report.csv", "report.json", "valid_counts.csv")]
    if _outputs_ready(out, targets, args.force):
        print(f"report outputs already exist in {out}; use --force to rebuild")
        return EXIT_OK

    parsed = load_parsed(args.parsed)
    gold = load_corpus(args.corpus, args.dataset)
    report = aggregate(
        parsed,
        gold,
        threshold=threshold,
        include_invalid=include_invalid,
        mode=mode,
        run_id=args.run_id,
        model_id=args.model_id,
        train_dataset=args.train_dataset,
        eval_dataset=args.eval_dataset or args.dataset,
    )
    (out / "report.md").write_text(render_table(report, "markdown"), encoding="utf-8")
    (out / "report.csv").write_text(render_table(report, "csv"), encoding="utf-8")
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    write_valid_counts([report], out / "valid_counts.csv")
    print(render_table(report, "markdown"))
    print(f"threshold rule: {report.threshold_rule}")
    config.effective.update(
        parsed=args.parsed,
        corpus=args.corpus,
        dataset=args.dataset.value,
        run_id=args.run_id,
        model_id=args.model_id,
    )
    write_manifest(
        out,
        "report",
        config.effective,
        [Path(args.parsed), Path(args.corpus)],
        targets,
        None,
        started,
    )
    return EXIT_OK


def _cmd_transfer(args) -> int:
    started = _utc_now()
    out = _prepare_out(args)
    targets = [out / "transfer.md", out / "transfer.csv"]
    if _outputs_ready(out, targets, args.force):
        print(f"transfer outputs already exist in {out}; use --force to rebuild")
        return EXIT_OK

    reports = [load_report(path) for path in args.report]
    matrix = transfer_matrix(reports)
    (out / "transfer.md").write_text(render_transfer(matrix, "markdown"), encoding="utf-8")
    (out / "transfer.csv").write_text(render_transfer(matrix, "csv"), encoding="utf-8")
    print(render_transfer(matrix, "markdown"))
    write_manifest(
        out,
        "transfer",
        {"reports": ",".join(args.report)},
        [Path(path) for path in args.report],
        targets,
        None,
        started,
    )
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fivew1h",
        description="News-element extraction pipeline: validate, split, export, "
        "run, parse, score, report.",
    )
    parser.add_argument("--version", action="version", version=f"fivew1h {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (flags win)")
    common.add_argument("--force", action="store_true", help="rebuild existing outputs")

    corpus_args = argparse.ArgumentParser(add_help=False)
    corpus_args.add_argument("--corpus", required=True, help="annotated corpus (JSON Lines)")
    corpus_args.add_argument(
        "--dataset", required=True, type=_dataset_tag, help="cnndm | xsum | nyt | ramds"
    )

    p = sub.add_parser("validate", parents=[common, corpus_args], help="check annotation rules")
    p.add_argument("--out", help="directory for validation.json")
    p.add_argument("--allow-all-empty", action="store_true")
    p.add_argument("--strict", action="store_true", help="warnings also fail")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("stats", parents=[common, corpus_args], help="corpus statistics")
    p.add_argument("--out", help="directory for stats.json")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("split", parents=[common, corpus_args], help="seeded train/val/test split")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--ratios", type=_ratio_triple, help="e.g. 0.8,0.1,0.1")
    p.add_argument("--extra", help="corpus merged into train only")
    p.add_argument("--extra-dataset", type=_dataset_tag, default=DatasetId.RAMDS)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser(
        "export-sft", parents=[common, corpus_args], help="write instruction-tuning records"
    )
    p.add_argument("--out", required=True)
    p.add_argument("--split", required=True, help="split.json from the split subcommand")
    p.add_argument("--subset", choices=["train", "validation", "test"])
    p.add_argument("--limit", type=int, help="article truncation budget in tokens")
    p.add_argument("--instruction")
    p.add_argument("--extra", help="corpus for merged train-only ids")
    p.add_argument("--extra-dataset", type=_dataset_tag, default=DatasetId.RAMDS)
    p.set_defaults(func=_cmd_export_sft)

    p = sub.add_parser("run", parents=[common, corpus_args], help="prompt an endpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--subset", choices=["train", "validation", "test", "all"])
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--endpoint-config", help="JSON endpoint description")
    group.add_argument("--replay", help="offline fixture of canned responses")
    p.add_argument("--mode", choices=["zero-shot", "few-shot"])
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int, help="exemplar selection seed")
    p.add_argument("--limit", type=int)
    p.add_argument("--template", help="prompt template file")
    p.add_argument("--top-p", type=float, dest="top_p")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", type=int, dest="max_tokens")
    p.add_argument("--max-in-flight", type=int, dest="max_in_flight")
    p.add_argument("--extra", help=argparse.SUPPRESS)
    p.add_argument("--extra-dataset", type=_dataset_tag, default=DatasetId.RAMDS)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("parse", parents=[common], help="recover element maps from a run log")
    p.add_argument("--run", required=True, help="run.jsonl from the run subcommand")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("score", parents=[common], help="per-article metric scores")
    p.add_argument("--parsed", help="parsed.jsonl from the parse subcommand")
    p.add_argument("--corpus")
    p.add_argument("--dataset", type=_dataset_tag)
    p.add_argument("--out")
    p.add_argument("--score-mode", choices=["concat", "best-match"], dest="score_mode")
    p.add_argument("--prediction", help="debug: score one prediction string")
    p.add_argument("--reference", help="debug: against one reference string")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("report", parents=[common], help="aggregate into per-element tables")
    p.add_argument("--parsed", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--dataset", required=True, type=_dataset_tag)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=_threshold_value, help="absolute count or fraction")
    p.add_argument("--include-invalid", action="store_true", help="score invalid as zero")
    p.add_argument("--score-mode", choices=["concat", "best-match"], dest="score_mode")
    p.add_argument("--run-id", default="run")
    p.add_argument("--model-id", default="model")
    p.add_argument("--train-dataset", type=_dataset_tag)
    p.add_argument("--eval-dataset", type=_dataset_tag)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("transfer", parents=[common], help="cross-dataset grid from reports")
    p.add_argument("--report", action="append", required=True, help="report.json (repeatable)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_transfer)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IoFailure, EndpointUnreachable, RateLimited, FixtureMissingArticle) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ToolkitError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
