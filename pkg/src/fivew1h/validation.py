"""Machine-checkable annotation rules and per-corpus validation reports.

The two substantive rules: every span must occur verbatim in the article text
(exact character match after Unicode NFC normalization, no case folding), and
no identical span string may be filed under two different elements. Empty
spans, duplicated spans within one element, and fully empty records are
flagged as data-hygiene issues.
"""
from __future__ import annotations

import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .corpus import AnnotationRecord
from .elements import ELEMENT_ORDER, ElementKind


class IssueKind(Enum):
    VERBATIM_VIOLATION = "VerbatimViolation"
    UNIQUENESS_VIOLATION = "UniquenessViolation"
    EMPTY_SPAN = "EmptySpan"
    DUPLICATE_SPAN_WITHIN_ELEMENT = "DuplicateSpanWithinElement"
    ALL_ELEMENTS_EMPTY = "AllElementsEmpty"


# Issue kinds that block downstream use of a record; the rest are warnings.
BLOCKING_KINDS = frozenset(
    {IssueKind.VERBATIM_VIOLATION, IssueKind.UNIQUENESS_VIOLATION, IssueKind.EMPTY_SPAN}
)


@dataclass(frozen=True)
class ValidationIssue:
    article_id: str
    kind: IssueKind
    element: ElementKind | None
    span: str | None
    detail: str

    @property
    def blocking(self) -> bool:
        return self.kind in BLOCKING_KINDS

    def to_payload(self) -> dict:
        return {
            "article_id": self.article_id,
            "kind": self.kind.value,
            "element": self.element.value if self.element else None,
            "span": self.span,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ValidationPolicy:
    verbatim: bool = True
    uniqueness: bool = True
    allow_all_empty: bool = False


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def validate_record(
    record: AnnotationRecord, policy: ValidationPolicy = ValidationPolicy()
) -> list[ValidationIssue]:
    """Check one record against the enabled rules.

    Issues are returned in deterministic order: elements in canonical order,
    spans in stored order, with the record-level AllElementsEmpty issue last.
    """
    issues: list[ValidationIssue] = []
    article_id = record.id
    text = _nfc(record.article.text)
    first_element_for_span: dict[str, ElementKind] = {}

    for kind in ELEMENT_ORDER:
        seen_in_element: Counter = Counter()
        for span in record.elements[kind]:
            normalized = _nfc(span)
            if not normalized.strip():
                issues.append(
                    ValidationIssue(
                        article_id=article_id,
                        kind=IssueKind.EMPTY_SPAN,
                        element=kind,
                        span=span,
                        detail=f"empty span under {kind.value!r}",
                    )
                )
                continue
            if policy.verbatim and normalized not in text:
                issues.append(
                    ValidationIssue(
                        article_id=article_id,
                        kind=IssueKind.VERBATIM_VIOLATION,
                        element=kind,
                        span=span,
                        detail=f"span under {kind.value!r} is not a substring of the article",
                    )
                )
            if seen_in_element[normalized]:
                issues.append(
                    ValidationIssue(
                        article_id=article_id,
                        kind=IssueKind.DUPLICATE_SPAN_WITHIN_ELEMENT,
                        element=kind,
                        span=span,
                        detail=f"span repeated within {kind.value!r}",
                    )
                )
            seen_in_element[normalized] += 1
            if policy.uniqueness:
                earlier = first_element_for_span.get(normalized)
                if earlier is None:
                    first_element_for_span[normalized] = kind
                elif earlier is not kind:
                    issues.append(
                        ValidationIssue(
                            article_id=article_id,
                            kind=IssueKind.UNIQUENESS_VIOLATION,
                            element=kind,
                            span=span,
                            detail=(
                                f"span filed under both {earlier.value!r} and {kind.value!r}"
                            ),
                        )
                    )

    if not policy.allow_all_empty and all(not record.elements[k] for k in ELEMENT_ORDER):
        issues.append(
            ValidationIssue(
                article_id=article_id,
                kind=IssueKind.ALL_ELEMENTS_EMPTY,
                element=None,
                span=None,
                detail="no spans annotated for any element",
            )
        )
    return issues


@dataclass
class ValidationReport:
    issues: list[ValidationIssue]
    record_count: int
    counts_by_kind: dict[IssueKind, int] = field(default_factory=dict)
    counts_by_element: dict[ElementKind, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.issues

    def to_json(self) -> str:
        payload = {
            "passed": self.passed,
            "record_count": self.record_count,
            "issue_count": len(self.issues),
            "counts_by_kind": {k.value: v for k, v in self.counts_by_kind.items()},
            "counts_by_element": {k.value: v for k, v in self.counts_by_element.items()},
            "issues": [issue.to_payload() for issue in self.issues],
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)

    def to_text(self) -> str:
        lines = [
            f"{'PASS' if self.passed else 'FAIL'}: {self.record_count} records, "
            f"{len(self.issues)} issues"
        ]
        for kind, count in self.counts_by_kind.items():
            lines.append(f"  {kind.value}: {count}")
        for issue in self.issues:
            where = f" [{issue.element.value}]" if issue.element else ""
            lines.append(f"  {issue.article_id}{where}: {issue.kind.value} - {issue.detail}")
        return "\n".join(lines)


def validate_corpus(
    records: list[AnnotationRecord], policy: ValidationPolicy = ValidationPolicy()
) -> ValidationReport:
    """Validate every record and aggregate counts by kind and element."""
    issues: list[ValidationIssue] = []
    for record in records:
        issues.extend(validate_record(record, policy))
    counts_by_kind: dict[IssueKind, int] = {}
    counts_by_element: dict[ElementKind, int] = {}
    for issue in issues:
        counts_by_kind[issue.kind] = counts_by_kind.get(issue.kind, 0) + 1
        if issue.element is not None:
            counts_by_element[issue.element] = counts_by_element.get(issue.element, 0) + 1
    return ValidationReport(
        issues=issues,
        record_count=len(records),
        counts_by_kind=counts_by_kind,
        counts_by_element=counts_by_element,
    )
