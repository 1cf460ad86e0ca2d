"""Deterministic zero-shot and few-shot extraction prompts.

The same rendered prompt text is sent to fine-tuned endpoints and hosted
models. Few-shot exemplars are the first k records of the seeded-shuffled
training split, with gold outputs in the canonical serialization shared with
the SFT exporter. No chain-of-thought scaffolding is ever emitted.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .corpus import AnnotationRecord, NewsArticle
from .elements import serialize_elements
from .errors import IoFailure, ToolkitError
from .sft import DEFAULT_INSTRUCTION, DEFAULT_TRUNCATION_LIMIT, truncate_article

DEFAULT_FORMAT_DIRECTIVE = (
    'Respond with a single JSON object with exactly these lowercase keys: '
    '"what", "when", "where", "why", "who", "how". '
    "Each value must be a JSON list of text spans copied verbatim from the article; "
    "use an empty list when the article does not answer that question."
)

DEFAULT_TEMPLATE = """{instruction}
{format_directive}

{exemplars}Article:
{article}

Output:"""

REQUIRED_PLACEHOLDERS = ("{instruction}", "{exemplars}", "{article}")


class PromptMode(Enum):
    ZERO_SHOT = "zero-shot"
    FEW_SHOT = "few-shot"


class InsufficientExemplars(ToolkitError):
    pass


class ExemplarLeakage(ToolkitError):
    pass


@dataclass(frozen=True)
class PromptSpec:
    mode: PromptMode = PromptMode.ZERO_SHOT
    shots: int = 5
    instruction: str = DEFAULT_INSTRUCTION
    format_directive: str = DEFAULT_FORMAT_DIRECTIVE
    exemplar_seed: int = 0
    exemplar_split: str = "train"
    truncation_limit: int = DEFAULT_TRUNCATION_LIMIT
    truncate_exemplars: bool = True
    template: str = DEFAULT_TEMPLATE

    def __post_init__(self):
        if self.mode is PromptMode.FEW_SHOT and self.shots < 1:
            raise ValueError(f"few-shot prompts need at least 1 exemplar, got {self.shots}")
        missing = [p for p in REQUIRED_PLACEHOLDERS if p not in self.template]
        if missing:
            raise ValueError(f"prompt template is missing placeholders: {missing}")


@dataclass(frozen=True)
class RenderedPrompt:
    article_id: str
    text: str
    exemplar_ids: list[str] = field(default_factory=list)


def load_template(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read prompt template {path}: {exc}") from exc


def select_exemplars(
    spec: PromptSpec, article_id: str, train_records: list[AnnotationRecord]
) -> list[AnnotationRecord]:
    """First k records of the seeded-shuffled training split."""
    if len(train_records) < spec.shots:
        raise InsufficientExemplars(
            f"need {spec.shots} exemplars, training split has {len(train_records)}"
        )
    order = list(range(len(train_records)))
    random.Random(spec.exemplar_seed).shuffle(order)
    chosen = [train_records[i] for i in order[: spec.shots]]
    for record in chosen:
        if record.id == article_id:
            raise ExemplarLeakage(
                f"article {article_id!r} under test appears among the exemplars"
            )
    return chosen


def _render_exemplar(index: int, record: AnnotationRecord, spec: PromptSpec) -> str:
    text = record.article.text
    if spec.truncate_exemplars:
        text = truncate_article(text, spec.truncation_limit)
    return (
        f"Example {index}:\n"
        f"Article:\n{text}\n"
        f"Output:\n{serialize_elements(record.elements)}\n"
    )


def build_prompt(
    spec: PromptSpec,
    article: NewsArticle,
    train_records: list[AnnotationRecord] | None = None,
) -> RenderedPrompt:
    """Render the prompt for one article.

    The rendered text contains the instruction exactly once and the target
    article exactly once, after all exemplars. Placeholder substitution is
    plain string replacement, so braces inside article text are safe.
    """
    exemplar_ids: list[str] = []
    exemplar_block = ""
    if spec.mode is PromptMode.FEW_SHOT:
        chosen = select_exemplars(spec, article.id, train_records or [])
        exemplar_ids = [record.id for record in chosen]
        exemplar_block = (
            "\n".join(_render_exemplar(i + 1, rec, spec) for i, rec in enumerate(chosen))
            + "\n"
        )

    target_text = truncate_article(article.text, spec.truncation_limit)
    text = _substitute(
        spec.template,
        {
            "{instruction}": spec.instruction,
            "{format_directive}": spec.format_directive,
            "{exemplars}": exemplar_block,
            "{article}": target_text,
        },
    )
    return RenderedPrompt(article_id=article.id, text=text, exemplar_ids=exemplar_ids)


def _substitute(template: str, mapping: dict[str, str]) -> str:
    """Single-pass placeholder substitution: substituted text is never
    rescanned, so braces inside articles or exemplars stay literal."""
    pattern = re.compile("|".join(re.escape(key) for key in mapping))
    return pattern.sub(lambda match: mapping[match.group(0)], template)
