"""The six news question elements and the canonical element-map serialization.

Every module that reads or writes an element map (gold annotations, SFT
targets, few-shot exemplars, parsed model output) goes through the helpers
here so the string form is byte-identical everywhere.
"""
from __future__ import annotations

import json
from enum import Enum


class ElementKind(Enum):
    """What / When / Where / Why / Who / How, in canonical order."""

    WHAT = "what"
    WHEN = "when"
    WHERE = "where"
    WHY = "why"
    WHO = "who"
    HOW = "how"

    def __str__(self) -> str:
        return self.value

    @property
    def title(self) -> str:
        return self.value.capitalize()


# Canonical ordering for all serialization and reporting.
ELEMENT_ORDER: tuple[ElementKind, ...] = (
    ElementKind.WHAT,
    ElementKind.WHEN,
    ElementKind.WHERE,
    ElementKind.WHY,
    ElementKind.WHO,
    ElementKind.HOW,
)

ELEMENT_NAMES: tuple[str, ...] = tuple(e.value for e in ELEMENT_ORDER)

_BY_NAME = {e.value: e for e in ELEMENT_ORDER}

# An element map: one ordered span list per element, all six keys present.
ElementMap = dict[ElementKind, list[str]]


def element_from_name(name: str) -> ElementKind | None:
    """Resolve a key to an element, case-insensitively. None if unknown."""
    return _BY_NAME.get(name.strip().lower())


def empty_elements() -> ElementMap:
    return {kind: [] for kind in ELEMENT_ORDER}


def serialize_elements(elements: ElementMap) -> str:
    """Canonical string form: a JSON object with the six lowercase keys in
    canonical order and spans in their stored order."""
    payload = {kind.value: list(elements.get(kind, ())) for kind in ELEMENT_ORDER}
    return json.dumps(payload, ensure_ascii=False)


def elements_from_payload(payload: dict[str, list[str]]) -> ElementMap:
    """Build an element map from a {name: spans} dict with canonical keys."""
    elements = empty_elements()
    for name, spans in payload.items():
        kind = element_from_name(name)
        if kind is None:
            raise KeyError(name)
        elements[kind] = list(spans)
    return elements
