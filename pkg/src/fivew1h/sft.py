"""Convert annotation records into supervised fine-tuning records.

SFT files are UTF-8 JSON Lines of {"instruction", "input", "output"} where
the output is the canonical element-map serialization. Inputs are truncated
to a token budget; the gold output is never edited, so spans that the
truncation severed are reported in the export warnings instead.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .corpus import AnnotationRecord
from .elements import ELEMENT_ORDER, ElementMap, elements_from_payload, serialize_elements
from .errors import IoFailure, ToolkitError
from .validation import ValidationPolicy, validate_record

DEFAULT_INSTRUCTION = "Please extract What, When, Where, Why, Who, and How from the news."

DEFAULT_TRUNCATION_LIMIT = 750
DEFAULT_MAX_OUTPUT_TOKENS = 1024


class Tokenizer(Protocol):
    """Pluggable tokenizer boundary for model-specific token budgets."""

    def tokenize(self, text: str) -> list[str]: ...

    def detokenize(self, tokens: list[str]) -> str: ...


class WhitespaceTokenizer:
    """Whitespace words in, single-space joined text out."""

    def tokenize(self, text: str) -> list[str]:
        return text.split()

    def detokenize(self, tokens: list[str]) -> str:
        return " ".join(tokens)


WHITESPACE = WhitespaceTokenizer()


class ValidationRequired(ToolkitError):
    """The record has blocking annotation issues and cannot be exported."""

    def __init__(self, article_id: str, issues):
        kinds = ", ".join(sorted({issue.kind.value for issue in issues}))
        super().__init__(f"record {article_id!r} has blocking issues: {kinds}")
        self.article_id = article_id
        self.issues = list(issues)


def truncate_article(
    text: str,
    limit: int = DEFAULT_TRUNCATION_LIMIT,
    tokenizer: Tokenizer = WHITESPACE,
) -> str:
    """Keep the first `limit` tokens, rejoined by the tokenizer. Idempotent."""
    if limit < 1:
        raise ValueError(f"truncation limit must be >= 1, got {limit}")
    return tokenizer.detokenize(tokenizer.tokenize(text)[:limit])


@dataclass(frozen=True)
class SftRecord:
    instruction: str
    input: str
    output: str

    def to_payload(self) -> dict:
        return {"instruction": self.instruction, "input": self.input, "output": self.output}

    def output_elements(self) -> ElementMap:
        return elements_from_payload(json.loads(self.output))


def to_sft_record(
    record: AnnotationRecord,
    instruction: str = DEFAULT_INSTRUCTION,
    limit: int = DEFAULT_TRUNCATION_LIMIT,
    tokenizer: Tokenizer = WHITESPACE,
    validate: Callable[[AnnotationRecord], list] | None = None,
) -> SftRecord:
    """Build one SFT record; raises ValidationRequired on blocking issues."""
    checker = validate or (lambda r: validate_record(r, ValidationPolicy(allow_all_empty=True)))
    blocking = [issue for issue in checker(record) if issue.blocking]
    if blocking:
        raise ValidationRequired(record.id, blocking)
    return SftRecord(
        instruction=instruction,
        input=truncate_article(record.article.text, limit, tokenizer),
        output=serialize_elements(record.elements),
    )


@dataclass
class ExportResult:
    written: int
    over_budget_ids: list[str] = field(default_factory=list)
    severed_span_ids: list[str] = field(default_factory=list)

    @property
    def warnings(self) -> list[str]:
        notes = [
            f"{article_id}: serialized output exceeds the generation budget"
            for article_id in self.over_budget_ids
        ]
        notes += [
            f"{article_id}: truncation severed one or more gold spans"
            for article_id in self.severed_span_ids
        ]
        return notes


def export_sft(
    records: list[AnnotationRecord],
    path: str | Path,
    instruction: str = DEFAULT_INSTRUCTION,
    limit: int = DEFAULT_TRUNCATION_LIMIT,
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS,
    tokenizer: Tokenizer = WHITESPACE,
) -> ExportResult:
    """Write records as SFT JSON Lines in input order.

    Returns the write count plus warning lists: records whose serialized
    output exceeds max_output_tokens, and records whose truncated input no
    longer contains every gold span.
    """
    path = Path(path)
    result = ExportResult(written=0)
    try:
        with path.open("w", encoding="utf-8") as handle:
            for record in records:
                sft = to_sft_record(record, instruction, limit, tokenizer)
                handle.write(json.dumps(sft.to_payload(), ensure_ascii=False))
                handle.write("\n")
                result.written += 1
                if len(tokenizer.tokenize(sft.output)) > max_output_tokens:
                    result.over_budget_ids.append(record.id)
                if _has_severed_span(record.elements, sft.input):
                    result.severed_span_ids.append(record.id)
    except OSError as exc:
        raise IoFailure(f"cannot write SFT file {path}: {exc}") from exc
    return result


def _has_severed_span(elements: ElementMap, truncated_input: str) -> bool:
    for kind in ELEMENT_ORDER:
        for span in elements[kind]:
            # Truncation normalizes whitespace, so compare in the same space.
            if span and " ".join(span.split()) not in truncated_input:
                return True
    return False


def load_sft(path: str | Path) -> list[SftRecord]:
    """Re-import an exported SFT file."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read SFT file {path}: {exc}") from exc
    records = []
    for index, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
            records.append(
                SftRecord(
                    instruction=payload["instruction"],
                    input=payload["input"],
                    output=payload["output"],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise IoFailure(f"SFT file {path} line {index}: {exc}") from exc
    return records
