"""Recover element maps from raw model output.

Models rarely stick to one shape: some emit a clean JSON object, some wrap it
in a fenced code block or chatter around it, some fall back to plain
``When: Sunday, May 12`` lines. Parsing tries progressively looser stages and
records which one succeeded, so downstream scoring can report how often each
endpoint needed rescuing. Extracted spans are kept byte-exact; no trimming or
case-folding happens here.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .elements import (
    ELEMENT_ORDER,
    ElementKind,
    ElementMap,
    element_from_name,
    empty_elements,
    serialize_elements,
)
from .errors import IoFailure
from .gateway import RawResponse


class ParseMode(Enum):
    STRICT_JSON = "StrictJson"
    FENCED_JSON = "FencedJson"
    KEY_LINE = "KeyLineFallback"
    UNPARSED = "Unparsed"


@dataclass(frozen=True)
class ParsedExtraction:
    article_id: str
    mode: ParseMode
    elements: ElementMap

    @property
    def valid(self) -> dict[ElementKind, bool]:
        """An element is valid when at least one span has visible content."""
        return {
            kind: any(span.strip() for span in self.elements[kind])
            for kind in ELEMENT_ORDER
        }

    @property
    def any_valid(self) -> bool:
        return any(self.valid.values())

    def to_payload(self) -> dict:
        return {
            "article_id": self.article_id,
            "mode": self.mode.value,
            "elements": {kind.value: list(self.elements[kind]) for kind in ELEMENT_ORDER},
        }


def _coerce_spans(value) -> list[str] | None:
    """Map a JSON value onto a span list; None means the value is unusable."""
    if value is None:
        return []
    if isinstance(value, str):
        return [value]
    if isinstance(value, list):
        spans = []
        for item in value:
            if isinstance(item, str):
                spans.append(item)
            elif item is None:
                continue
            else:
                spans.append(json.dumps(item, ensure_ascii=False))
        return spans
    return None


def _elements_from_mapping(payload: dict) -> ElementMap | None:
    """Accept a decoded JSON object if it names at least one element."""
    elements = empty_elements()
    recognized = False
    for key, value in payload.items():
        kind = element_from_name(str(key))
        if kind is None:
            continue
        spans = _coerce_spans(value)
        if spans is None:
            continue
        recognized = True
        elements[kind] = elements[kind] + spans
    return elements if recognized else None


def _try_json(text: str) -> ElementMap | None:
    try:
        payload = json.loads(text)
    except (json.JSONDecodeError, RecursionError):
        return None
    if not isinstance(payload, dict):
        return None
    return _elements_from_mapping(payload)


def _balanced_object(text: str, start: int) -> str | None:
    """Return the balanced {...} slice starting at text[start], minding strings."""
    depth = 0
    in_string = False
    escaped = False
    for index in range(start, len(text)):
        char = text[index]
        if in_string:
            if escaped:
                escaped = False
            elif char == "\\":
                escaped = True
            elif char == '"':
                in_string = False
        elif char == '"':
            in_string = True
        elif char == "{":
            depth += 1
        elif char == "}":
            depth -= 1
            if depth == 0:
                return text[start : index + 1]
    return None


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)
_QUOTED_KEY_RE = re.compile(
    r'"(?:what|when|where|why|who|how)"\s*:', re.IGNORECASE
)


def _try_embedded_json(text: str) -> ElementMap | None:
    for match in _FENCE_RE.finditer(text):
        block = match.group(1).strip()
        elements = _try_json(block)
        if elements is not None:
            return elements

    position = text.find("{")
    while position != -1:
        candidate = _balanced_object(text, position)
        if candidate is not None:
            elements = _try_json(candidate)
            if elements is not None:
                return elements
        position = text.find("{", position + 1)

    # A keyed stream without enclosing braces ("what": [...], "when": [...])
    # becomes an object once wrapped.
    if _QUOTED_KEY_RE.search(text):
        stripped = _FENCE_RE.sub(lambda m: m.group(1), text).strip()
        stripped = stripped.rstrip(",")
        elements = _try_json("{" + stripped + "}")
        if elements is not None:
            return elements
    return None


_KEY_LINE_RE = re.compile(
    r"""^\s*(?:[-*•]\s*)?(?:\*\*)?["']?
        (what|when|where|why|who|how)
        ["']?(?:\*\*)?\s*[::]\s*(.*?)\s*$""",
    re.IGNORECASE | re.VERBOSE,
)


def _try_key_lines(text: str) -> ElementMap | None:
    """Read one element per `Name: value` line; the value stays a single span."""
    elements = empty_elements()
    recognized = False
    for line in text.splitlines():
        match = _KEY_LINE_RE.match(line)
        if match is None:
            continue
        kind = element_from_name(match.group(1))
        assert kind is not None
        recognized = True
        value = match.group(2)
        if value:
            elements[kind] = elements[kind] + [value]
    return elements if recognized else None


def parse_text(article_id: str, text: str) -> ParsedExtraction:
    elements = _try_json(text.strip())
    if elements is not None:
        return ParsedExtraction(article_id, ParseMode.STRICT_JSON, elements)

    elements = _try_embedded_json(text)
    if elements is not None:
        return ParsedExtraction(article_id, ParseMode.FENCED_JSON, elements)

    elements = _try_key_lines(text)
    if elements is not None:
        return ParsedExtraction(article_id, ParseMode.KEY_LINE, elements)

    return ParsedExtraction(article_id, ParseMode.UNPARSED, empty_elements())


def parse_response(response: RawResponse) -> ParsedExtraction:
    return parse_text(response.article_id, response.raw_text)


def reserialize(parsed: ParsedExtraction) -> str:
    """Canonical serialization of the recovered elements (spans byte-exact)."""
    return serialize_elements(parsed.elements)


def validity_summary(parsed: list[ParsedExtraction]) -> dict[str, int]:
    """Per-element count of responses with at least one usable span."""
    counts = {kind.value: 0 for kind in ELEMENT_ORDER}
    for item in parsed:
        for kind, ok in item.valid.items():
            if ok:
                counts[kind.value] += 1
    return counts


def mode_summary(parsed: list[ParsedExtraction]) -> dict[str, int]:
    counts = {mode.value: 0 for mode in ParseMode}
    for item in parsed:
        counts[item.mode.value] += 1
    return counts


def save_parsed(parsed: list[ParsedExtraction], path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as handle:
            for item in parsed:
                handle.write(json.dumps(item.to_payload(), ensure_ascii=False))
                handle.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write parsed output {path}: {exc}") from exc


def load_parsed(path: str | Path) -> list[ParsedExtraction]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read parsed output {path}: {exc}") from exc
    parsed = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
            elements = empty_elements()
            for key, spans in payload["elements"].items():
                kind = element_from_name(key)
                if kind is None:
                    raise ValueError(f"unknown element {key!r}")
                elements[kind] = [str(span) for span in spans]
            parsed.append(
                ParsedExtraction(
                    article_id=payload["article_id"],
                    mode=ParseMode(payload["mode"]),
                    elements=elements,
                )
            )
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise IoFailure(f"{path}:{number}: malformed parsed record: {exc}") from exc
    return parsed
