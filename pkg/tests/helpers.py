"""Shared builders for in-memory records and parsed responses."""
from __future__ import annotations

from fivew1h.corpus import AnnotationRecord, DatasetId, NewsArticle, NewsCategory
from fivew1h.elements import ElementKind, empty_elements
from fivew1h.parsing import ParsedExtraction, ParseMode


def make_record(
    article_id: str = "art-0001",
    dataset: DatasetId = DatasetId.CNNDM,
    category: int = 1,
    text: str | None = None,
    **spans: list[str] | str,
) -> AnnotationRecord:
    """Record with the given spans; text defaults to a concatenation of all
    spans so every span is verbatim by construction."""
    elements = empty_elements()
    for name, value in spans.items():
        kind = ElementKind(name)
        elements[kind] = [value] if isinstance(value, str) else list(value)
    if text is None:
        joined = " ".join(span for kind in elements for span in elements[kind])
        text = joined or "placeholder article body text."
    article = NewsArticle(
        id=article_id, dataset=dataset, category=NewsCategory(category), text=text
    )
    return AnnotationRecord(article=article, elements=elements)


def make_parsed(
    article_id: str = "art-0001",
    mode: ParseMode = ParseMode.STRICT_JSON,
    **spans: list[str] | str,
) -> ParsedExtraction:
    elements = empty_elements()
    for name, value in spans.items():
        kind = ElementKind(name)
        elements[kind] = [value] if isinstance(value, str) else list(value)
    return ParsedExtraction(article_id=article_id, mode=mode, elements=elements)
