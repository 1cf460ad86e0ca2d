"""Load, model, split, and summarize annotated news corpora.

Corpus files are UTF-8 JSON Lines, one record per line:

    {"id": "...", "dataset": "cnndm", "category": 1, "article": "...",
     "elements": {"what": [...], "when": [...], ...}}

Element keys are normalized to the canonical lowercase names on load and
missing keys become empty span lists.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .elements import ELEMENT_ORDER, ElementKind, ElementMap, element_from_name, empty_elements
from .errors import IoFailure, ToolkitError


class DatasetId(Enum):
    CNNDM = "cnndm"
    XSUM = "xsum"
    NYT = "nyt"
    RAMDS = "ramds"

    def __str__(self) -> str:
        return self.value

    @property
    def display_name(self) -> str:
        return _DATASET_DISPLAY[self]

    @property
    def short_name(self) -> str:
        return _DATASET_SHORT[self]

    @classmethod
    def from_tag(cls, tag: str) -> "DatasetId":
        try:
            return cls(tag.strip().lower())
        except ValueError:
            raise ValueError(f"unknown dataset tag {tag!r}") from None


_DATASET_DISPLAY = {
    DatasetId.CNNDM: "CNN/DailyMail",
    DatasetId.XSUM: "XSum",
    DatasetId.NYT: "NYT",
    DatasetId.RAMDS: "RA-MDS",
}

_DATASET_SHORT = {
    DatasetId.CNNDM: "CNN",
    DatasetId.XSUM: "XSum",
    DatasetId.NYT: "NYT",
    DatasetId.RAMDS: "RA-MDS",
}

# Reference mean article word counts for the four source corpora, used by the
# stats report for side-by-side comparison with a loaded sample.
REFERENCE_MEAN_WORDS = {
    DatasetId.CNNDM: 579,
    DatasetId.XSUM: 523,
    DatasetId.NYT: 552,
    DatasetId.RAMDS: 568,
}


class NewsCategory(Enum):
    ACCIDENTS_NATURAL_DISASTERS = 1
    ATTACKS = 2
    NEW_TECHNOLOGY = 3
    HEALTH_SAFETY = 4
    ENDANGERED_RESOURCES = 5
    INVESTIGATIONS_TRIALS = 6

    @property
    def display_name(self) -> str:
        return _CATEGORY_DISPLAY[self]


_CATEGORY_DISPLAY = {
    NewsCategory.ACCIDENTS_NATURAL_DISASTERS: "Accidents and Natural Disasters",
    NewsCategory.ATTACKS: "Attacks (Criminal/Terrorist)",
    NewsCategory.NEW_TECHNOLOGY: "New Technology",
    NewsCategory.HEALTH_SAFETY: "Health and Safety",
    NewsCategory.ENDANGERED_RESOURCES: "Endangered Resources",
    NewsCategory.INVESTIGATIONS_TRIALS: "Investigations and Trials (Criminal/Legal/Other)",
}


class MalformedRecord(ToolkitError):
    """A corpus line could not be interpreted as an annotation record."""

    def __init__(self, index: int, reason: str):
        super().__init__(f"record {index}: {reason}")
        self.index = index
        self.reason = reason


class UnknownElementKey(ToolkitError):
    def __init__(self, index: int, key: str):
        super().__init__(f"record {index}: unknown element key {key!r}")
        self.index = index
        self.key = key


class DuplicateArticleId(ToolkitError):
    def __init__(self, article_id: str):
        super().__init__(f"duplicate article id {article_id!r}")
        self.article_id = article_id


class EmptyCorpus(ToolkitError):
    pass


class RatioSumInvalid(ToolkitError):
    pass


@dataclass(frozen=True)
class NewsArticle:
    id: str
    dataset: DatasetId
    category: NewsCategory
    text: str

    @property
    def word_count(self) -> int:
        return len(self.text.split())


@dataclass(frozen=True)
class AnnotationRecord:
    """One news article plus its per-element verbatim span lists."""

    article: NewsArticle
    elements: ElementMap

    @property
    def id(self) -> str:
        return self.article.id

    def span_count(self) -> int:
        return sum(len(spans) for spans in self.elements.values())


def _parse_record(index: int, obj: object, expected: DatasetId) -> AnnotationRecord:
    if not isinstance(obj, dict):
        raise MalformedRecord(index, "line is not a JSON object")

    article_id = obj.get("id")
    if not isinstance(article_id, str) or not article_id:
        raise MalformedRecord(index, "missing or empty 'id'")

    tag = obj.get("dataset")
    if not isinstance(tag, str):
        raise MalformedRecord(index, "missing 'dataset' tag")
    try:
        dataset = DatasetId.from_tag(tag)
    except ValueError as exc:
        raise MalformedRecord(index, str(exc)) from None
    if dataset is not expected:
        raise MalformedRecord(
            index, f"dataset {dataset.value!r} does not match expected {expected.value!r}"
        )

    category_code = obj.get("category")
    if isinstance(category_code, bool) or not isinstance(category_code, int):
        raise MalformedRecord(index, "missing or non-integer 'category'")
    try:
        category = NewsCategory(category_code)
    except ValueError:
        raise MalformedRecord(index, f"unknown category code {category_code}") from None

    text = obj.get("article")
    if not isinstance(text, str) or not text:
        raise MalformedRecord(index, "missing or empty 'article'")

    raw_elements = obj.get("elements", {})
    if not isinstance(raw_elements, dict):
        raise MalformedRecord(index, "'elements' is not an object")
    elements = empty_elements()
    for key, spans in raw_elements.items():
        kind = element_from_name(key) if isinstance(key, str) else None
        if kind is None:
            raise UnknownElementKey(index, str(key))
        if not isinstance(spans, list) or not all(isinstance(s, str) for s in spans):
            raise MalformedRecord(index, f"element {kind.value!r} is not a list of strings")
        elements[kind] = list(spans)

    article = NewsArticle(id=article_id, dataset=dataset, category=category, text=text)
    return AnnotationRecord(article=article, elements=elements)


def load_corpus(path: str | Path, dataset: DatasetId) -> list[AnnotationRecord]:
    """Load a JSON Lines corpus file, preserving file order.

    Raises MalformedRecord / UnknownElementKey with the offending record index,
    and DuplicateArticleId when an id repeats within the file.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read corpus file {path}: {exc}") from exc

    records: list[AnnotationRecord] = []
    seen: set[str] = set()
    for index, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(index, f"invalid JSON: {exc}") from None
        record = _parse_record(index, obj, dataset)
        if record.id in seen:
            raise DuplicateArticleId(record.id)
        seen.add(record.id)
        records.append(record)
    return records


def record_to_payload(record: AnnotationRecord) -> dict:
    return {
        "id": record.article.id,
        "dataset": record.article.dataset.value,
        "category": record.article.category.value,
        "article": record.article.text,
        "elements": {kind.value: list(record.elements[kind]) for kind in ELEMENT_ORDER},
    }


def save_corpus(records: list[AnnotationRecord], path: str | Path) -> int:
    """Write records back out in the corpus file schema. Returns line count."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as handle:
            for record in records:
                handle.write(json.dumps(record_to_payload(record), ensure_ascii=False))
                handle.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write corpus file {path}: {exc}") from exc
    return len(records)


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train/validation/test article id lists plus the seed used."""

    train: list[str]
    validation: list[str]
    test: list[str]
    seed: int

    def to_payload(self) -> dict:
        return {
            "seed": self.seed,
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
        }


def split_dataset(
    records: list[AnnotationRecord],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    merge_extra: list[AnnotationRecord] | None = None,
) -> SplitAssignment:
    """Seeded shuffle then floor-based 3-way split; the remainder goes to train.

    merge_extra records (the corpus that is never split on its own) are
    appended to the train list only.
    """
    if not records:
        raise EmptyCorpus("cannot split an empty corpus")
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise RatioSumInvalid(f"ratios must be three nonnegative values, got {ratios}")
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise RatioSumInvalid(f"ratios must sum to 1.0, got {ratios}")

    ids = [record.id for record in records]
    extra_ids = [record.id for record in (merge_extra or [])]
    combined = set(ids)
    for extra in extra_ids:
        if extra in combined:
            raise DuplicateArticleId(extra)
        combined.add(extra)
    if len(combined) != len(ids) + len(extra_ids):
        raise DuplicateArticleId("duplicate ids in split input")

    shuffled = list(ids)
    random.Random(seed).shuffle(shuffled)

    n = len(shuffled)
    n_validation = math.floor(n * ratios[1])
    n_test = math.floor(n * ratios[2])
    n_train = n - n_validation - n_test

    train = shuffled[:n_train] + extra_ids
    validation = shuffled[n_train : n_train + n_validation]
    test = shuffled[n_train + n_validation :]
    return SplitAssignment(train=train, validation=validation, test=test, seed=seed)


def save_split(split: SplitAssignment, path: str | Path) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(split.to_payload(), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write split file {path}: {exc}") from exc


def load_split(path: str | Path) -> SplitAssignment:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read split file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"split file {path} is not valid JSON: {exc}") from exc
    return SplitAssignment(
        train=list(payload["train"]),
        validation=list(payload["validation"]),
        test=list(payload["test"]),
        seed=int(payload["seed"]),
    )


@dataclass
class CorpusStats:
    record_count: int
    span_count: int
    mean_words: float | None
    per_element: dict[ElementKind, int] = field(default_factory=dict)
    per_category: dict[NewsCategory, int] = field(default_factory=dict)

    @property
    def mean_words_display(self) -> int | None:
        return None if self.mean_words is None else round(self.mean_words)


def corpus_stats(records: list[AnnotationRecord]) -> CorpusStats:
    """Record count, mean article length, and per-element / per-category counts.

    The per-element count is the number of records with at least one span for
    that element; span_count is the total number of annotated spans, reported
    separately because a labeled "entry" may be counted either way.
    """
    per_element = {kind: 0 for kind in ELEMENT_ORDER}
    per_category = {category: 0 for category in NewsCategory}
    total_words = 0
    span_count = 0
    for record in records:
        total_words += record.article.word_count
        per_category[record.article.category] += 1
        span_count += record.span_count()
        for kind in ELEMENT_ORDER:
            if record.elements[kind]:
                per_element[kind] += 1
    mean = total_words / len(records) if records else None
    return CorpusStats(
        record_count=len(records),
        span_count=span_count,
        mean_words=mean,
        per_element=per_element,
        per_category=per_category,
    )
