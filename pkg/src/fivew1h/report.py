"""Aggregate per-article scores into per-element tables and transfer grids.

Scores stay raw [0, 1] everywhere upstream; this module is the single place
where means are put on the percent scale, and numbers are rounded to two
decimals only when a table is rendered. An element's scores are displayed
only when its valid-response count clears the threshold; hidden cells render
as an em dash in both markdown and CSV.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import AnnotationRecord, DatasetId
from .elements import ELEMENT_ORDER, ElementKind
from .errors import IoFailure, ToolkitError
from .metrics import ScoreMode, score_element
from .parsing import ParsedExtraction

DASH = "—"
METRIC_COLUMNS = ("r1", "r2", "rl", "b4")
METRIC_TITLES = {"r1": "R-1", "r2": "R-2", "rl": "R-L", "b4": "B-4"}


class MissingGold(ToolkitError):
    def __init__(self, orphan_ids: list[str]):
        self.orphan_ids = orphan_ids
        shown = ", ".join(orphan_ids[:5])
        suffix = "" if len(orphan_ids) <= 5 else f" (+{len(orphan_ids) - 5} more)"
        super().__init__(f"parsed responses without gold records: {shown}{suffix}")


class DuplicateCell(ToolkitError):
    pass


@dataclass(frozen=True)
class ElementReport:
    element: ElementKind
    valid_count: int
    displayed: bool
    # Percent-scale means over scored responses; None when nothing was scored.
    rouge1: float | None
    rouge2: float | None
    rougeL: float | None
    bleu4: float | None

    def metric(self, column: str) -> float | None:
        return {
            "r1": self.rouge1,
            "r2": self.rouge2,
            "rl": self.rougeL,
            "b4": self.bleu4,
        }[column]

    def to_payload(self) -> dict:
        return {
            "element": self.element.value,
            "valid_count": self.valid_count,
            "displayed": self.displayed,
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "rougeL": self.rougeL,
            "bleu4": self.bleu4,
        }


@dataclass(frozen=True)
class EvalReport:
    run_id: str
    model_id: str
    train_dataset: DatasetId | None
    eval_dataset: DatasetId | None
    article_count: int
    threshold_rule: str
    elements: tuple[ElementReport, ...]

    def __post_init__(self):
        kinds = tuple(item.element for item in self.elements)
        if kinds != ELEMENT_ORDER:
            raise ValueError(
                f"a report carries exactly six element rows in canonical order, got {kinds}"
            )

    def element_report(self, kind: ElementKind) -> ElementReport:
        return self.elements[ELEMENT_ORDER.index(kind)]

    def to_payload(self) -> dict:
        return {
            "run_id": self.run_id,
            "model_id": self.model_id,
            "train_dataset": self.train_dataset.value if self.train_dataset else None,
            "eval_dataset": self.eval_dataset.value if self.eval_dataset else None,
            "article_count": self.article_count,
            "threshold_rule": self.threshold_rule,
            "elements": [item.to_payload() for item in self.elements],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), ensure_ascii=False, indent=2)

    @classmethod
    def from_payload(cls, payload: dict) -> "EvalReport":
        elements = tuple(
            ElementReport(
                element=ElementKind(item["element"]),
                valid_count=int(item["valid_count"]),
                displayed=bool(item["displayed"]),
                rouge1=item["rouge1"],
                rouge2=item["rouge2"],
                rougeL=item["rougeL"],
                bleu4=item["bleu4"],
            )
            for item in payload["elements"]
        )
        return cls(
            run_id=payload["run_id"],
            model_id=payload["model_id"],
            train_dataset=DatasetId(payload["train_dataset"])
            if payload.get("train_dataset")
            else None,
            eval_dataset=DatasetId(payload["eval_dataset"])
            if payload.get("eval_dataset")
            else None,
            article_count=int(payload["article_count"]),
            threshold_rule=payload["threshold_rule"],
            elements=elements,
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_payload(json.loads(text))


def load_report(path: str | Path) -> EvalReport:
    path = Path(path)
    try:
        return EvalReport.from_json(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read report {path}: {exc}") from exc
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise IoFailure(f"report {path} is malformed: {exc}") from exc


def resolve_threshold(threshold: int | float, total: int) -> tuple[float, str]:
    """An int is an absolute count; a float in (0, 1) is a fraction of total."""
    if isinstance(threshold, bool):
        raise ValueError("threshold must be an int or a fraction, not a bool")
    if isinstance(threshold, int):
        return float(threshold), f"valid count > {threshold} (absolute)"
    if 0.0 < threshold < 1.0:
        absolute = threshold * total
        return absolute, f"valid count > {threshold:g} of {total} ({absolute:g})"
    raise ValueError(f"fractional threshold must lie in (0, 1), got {threshold}")


def aggregate(
    parsed: list[ParsedExtraction],
    gold: list[AnnotationRecord],
    threshold: int | float = 80,
    include_invalid: bool = False,
    mode: ScoreMode = ScoreMode.CONCAT,
    run_id: str = "run",
    model_id: str = "model",
    train_dataset: DatasetId | None = None,
    eval_dataset: DatasetId | None = None,
) -> EvalReport:
    """Join parsed responses with gold records and average per-element scores.

    Means cover valid responses only; with include_invalid, invalid responses
    enter the mean as zeros instead of being dropped. The threshold drives
    only the displayed flags, never the stored means.
    """
    gold_by_id = {record.id: record for record in gold}
    orphans = [item.article_id for item in parsed if item.article_id not in gold_by_id]
    if orphans:
        raise MissingGold(orphans)

    total = len(parsed)
    threshold_abs, rule = resolve_threshold(threshold, total)

    element_reports = []
    for kind in ELEMENT_ORDER:
        sums = {column: 0.0 for column in METRIC_COLUMNS}
        scored = 0
        valid_count = 0
        for item in parsed:
            if item.valid[kind]:
                valid_count += 1
                scores = score_element(
                    item.elements[kind],
                    gold_by_id[item.article_id].elements[kind],
                    mode,
                )
                sums["r1"] += scores.rouge1.f1
                sums["r2"] += scores.rouge2.f1
                sums["rl"] += scores.rougeL.f1
                sums["b4"] += scores.bleu4
                scored += 1
            elif include_invalid:
                scored += 1
        if scored:
            means = {column: 100.0 * sums[column] / scored for column in METRIC_COLUMNS}
        else:
            means = {column: None for column in METRIC_COLUMNS}
        element_reports.append(
            ElementReport(
                element=kind,
                valid_count=valid_count,
                displayed=valid_count > threshold_abs,
                rouge1=means["r1"],
                rouge2=means["r2"],
                rougeL=means["rl"],
                bleu4=means["b4"],
            )
        )

    return EvalReport(
        run_id=run_id,
        model_id=model_id,
        train_dataset=train_dataset,
        eval_dataset=eval_dataset,
        article_count=total,
        threshold_rule=rule,
        elements=tuple(element_reports),
    )


def _cell(item: ElementReport, column: str) -> str:
    value = item.metric(column)
    if not item.displayed or value is None:
        return DASH
    return f"{value:.2f}"


def _score_columns() -> list[tuple[ElementKind, str]]:
    return [(kind, column) for kind in ELEMENT_ORDER for column in METRIC_COLUMNS]


def render_table(reports: EvalReport | list[EvalReport], format: str = "markdown") -> str:
    """One row per report; per-element column groups; hidden cells as a dash."""
    if isinstance(reports, EvalReport):
        reports = [reports]
    if format == "markdown":
        header = ["Model", "Articles"]
        header += [
            f"{kind.title} {METRIC_TITLES[column]}" for kind, column in _score_columns()
        ]
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join(" --- " for _ in header) + "|",
        ]
        for report in reports:
            row = [report.model_id, str(report.article_count)]
            row += [
                _cell(report.element_report(kind), column)
                for kind, column in _score_columns()
            ]
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"

    if format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        header = ["run_id", "model_id", "train_dataset", "eval_dataset", "articles"]
        for kind in ELEMENT_ORDER:
            header.append(f"{kind.value}_valid")
            header += [f"{kind.value}_{column}" for column in METRIC_COLUMNS]
        writer.writerow(header)
        for report in reports:
            row = [
                report.run_id,
                report.model_id,
                report.train_dataset.value if report.train_dataset else "",
                report.eval_dataset.value if report.eval_dataset else "",
                report.article_count,
            ]
            for kind in ELEMENT_ORDER:
                item = report.element_report(kind)
                row.append(item.valid_count)
                row += [_cell(item, column) for column in METRIC_COLUMNS]
            writer.writerow(row)
        return buffer.getvalue()

    raise ValueError(f"unknown table format {format!r}")


def parse_report_csv(text: str) -> list[dict]:
    """Re-read a rendered CSV; dash cells come back as None, numbers as floats."""
    rows = []
    for record in csv.DictReader(io.StringIO(text)):
        row: dict = {
            "run_id": record["run_id"],
            "model_id": record["model_id"],
            "train_dataset": record["train_dataset"] or None,
            "eval_dataset": record["eval_dataset"] or None,
            "articles": int(record["articles"]),
        }
        for kind in ELEMENT_ORDER:
            row[f"{kind.value}_valid"] = int(record[f"{kind.value}_valid"])
            for column in METRIC_COLUMNS:
                cell = record[f"{kind.value}_{column}"]
                row[f"{kind.value}_{column}"] = None if cell == DASH else float(cell)
        rows.append(row)
    return rows


@dataclass(frozen=True)
class TransferMatrix:
    """Reports indexed by (train_dataset, eval_dataset)."""

    cells: dict[tuple[DatasetId, DatasetId], EvalReport]
    missing: tuple[tuple[DatasetId, DatasetId], ...]

    def in_domain(self, dataset: DatasetId) -> EvalReport | None:
        return self.cells.get((dataset, dataset))

    def rows(self) -> list[tuple[str, EvalReport]]:
        """Rows grouped by eval dataset; the in-domain row leads each group."""
        ordered = []
        evals = sorted({key[1] for key in self.cells}, key=list(DatasetId).index)
        for eval_dataset in evals:
            group = [key for key in self.cells if key[1] == eval_dataset]
            group.sort(
                key=lambda key: (key[0] != key[1], list(DatasetId).index(key[0]))
            )
            for train_dataset, eval_ds in group:
                if train_dataset == eval_ds:
                    label = f"{eval_ds.short_name}(in-domain)"
                else:
                    label = f"{eval_ds.short_name}({train_dataset.short_name} fine-tune)"
                ordered.append((label, self.cells[(train_dataset, eval_ds)]))
        return ordered


def transfer_matrix(reports: list[EvalReport]) -> TransferMatrix:
    cells: dict[tuple[DatasetId, DatasetId], EvalReport] = {}
    for report in reports:
        if report.train_dataset is None or report.eval_dataset is None:
            raise ValueError(
                f"report {report.run_id!r} lacks train/eval dataset tags required "
                "for a transfer grid"
            )
        key = (report.train_dataset, report.eval_dataset)
        if key in cells:
            raise DuplicateCell(
                f"two reports cover train={key[0]} eval={key[1]}: "
                f"{cells[key].run_id!r} and {report.run_id!r}"
            )
        cells[key] = report
    trains = sorted({key[0] for key in cells}, key=list(DatasetId).index)
    evals = sorted({key[1] for key in cells}, key=list(DatasetId).index)
    missing = tuple(
        (train, eval_ds)
        for train in trains
        for eval_ds in evals
        if (train, eval_ds) not in cells
    )
    return TransferMatrix(cells=cells, missing=missing)


def render_transfer(matrix: TransferMatrix, format: str = "markdown") -> str:
    """Grid of rows; in markdown the best displayed value per eval-dataset
    group is bolded, column by column."""
    rows = matrix.rows()

    if format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        header = ["system"]
        header += [
            f"{kind.value}_{column}" for kind, column in _score_columns()
        ]
        writer.writerow(header)
        for label, report in rows:
            writer.writerow(
                [label]
                + [
                    _cell(report.element_report(kind), column)
                    for kind, column in _score_columns()
                ]
            )
        return buffer.getvalue()

    if format != "markdown":
        raise ValueError(f"unknown transfer format {format!r}")

    # Best-value comparison stays inside one eval dataset's rows.
    best: dict[tuple[DatasetId, ElementKind, str], float] = {}
    for label, report in rows:
        assert report.eval_dataset is not None
        for kind, column in _score_columns():
            item = report.element_report(kind)
            value = item.metric(column)
            if not item.displayed or value is None:
                continue
            key = (report.eval_dataset, kind, column)
            if key not in best or value > best[key]:
                best[key] = value

    header = ["System"]
    header += [f"{kind.title} {METRIC_TITLES[column]}" for kind, column in _score_columns()]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(" --- " for _ in header) + "|",
    ]
    for label, report in rows:
        cells = [label]
        for kind, column in _score_columns():
            item = report.element_report(kind)
            text = _cell(item, column)
            value = item.metric(column)
            if (
                text != DASH
                and value is not None
                and report.eval_dataset is not None
                and best.get((report.eval_dataset, kind, column)) == value
            ):
                text = f"**{text}**"
            cells.append(text)
        lines.append("| " + " | ".join(cells) + " |")
    if matrix.missing:
        holes = ", ".join(
            f"train={train.value}/eval={eval_ds.value}" for train, eval_ds in matrix.missing
        )
        lines.append("")
        lines.append(f"Missing cells: {holes}")
    return "\n".join(lines) + "\n"


def write_valid_counts(reports: list[EvalReport], path: str | Path) -> None:
    """Model × element valid-response counts, plot-ready."""
    path = Path(path)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["model"] + [kind.value for kind in ELEMENT_ORDER])
    for report in reports:
        writer.writerow(
            [report.model_id]
            + [report.element_report(kind).valid_count for kind in ELEMENT_ORDER]
        )
    try:
        path.write_text(buffer.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write valid counts {path}: {exc}") from exc
