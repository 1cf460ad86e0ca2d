#!/usr/bin/env python3
"""Regenerate the committed fixtures under fixtures/.

Everything is seeded, so reruns are byte-identical. The main sample is a
100-article corpus whose mean length is exactly 579 words, paired with a
replay file whose responses are planted to produce per-element valid counts
of what=100, when=95, where=79, why=90, who=98, how=85 — one element below
the default display threshold of 80. Response styles are mixed: indices
10-14 answer in `Name: value` lines, 20-22 in a quoted-key block without
outer braces, everything else in canonical JSON.
"""
from __future__ import annotations

import argparse
import json
import random
import unicodedata
from pathlib import Path

from fivew1h.corpus import AnnotationRecord, DatasetId, NewsCategory, NewsArticle, save_corpus
from fivew1h.elements import ELEMENT_ORDER, ElementKind, serialize_elements

VALID_COUNTS = {
    ElementKind.WHAT: 100,
    ElementKind.WHEN: 95,
    ElementKind.WHERE: 79,
    ElementKind.WHY: 90,
    ElementKind.WHO: 98,
    ElementKind.HOW: 85,
}

KEY_LINE_INDICES = range(10, 15)
QUOTED_BLOCK_INDICES = range(20, 23)

WORDS = (
    "the a an on in at after before during mayor council storm flood river city "
    "village crowd police report statement official witness morning evening night "
    "sunday monday tuesday friday january march july harvest festival bridge road "
    "market school hospital court minister farmer driver teacher nurse crew team "
    "rescue damage repair protest meeting vote budget plan announcement delay "
    "investigation fire crash strike drought rainfall temperature record warning "
    "northern southern coastal rural central nearby local regional national early "
    "late sudden severe minor major brief long planned unexpected reported said "
    "gathered arrived departed closed opened approved rejected promised warned "
    "café naïve señor zürich"
).split()


def _tokens(rng: random.Random, count: int) -> list[str]:
    tokens = [rng.choice(WORDS) for _ in range(count)]
    # Sentence-final punctuation is glued to the word so that joining with
    # single spaces keeps word counts and verbatim slices exact.
    position = 0
    while position < count - 1:
        position += rng.randrange(8, 15)
        if position < count:
            tokens[position] = tokens[position] + "."
    tokens[-1] = tokens[-1] + "."
    return tokens


def _span(rng: random.Random, tokens: list[str], taken: set[str], width: tuple[int, int]) -> str:
    for _ in range(1000):
        size = rng.randrange(width[0], width[1] + 1)
        start = rng.randrange(0, len(tokens) - size)
        span = " ".join(tokens[start : start + size])
        if span not in taken:
            taken.add(span)
            return span
    raise RuntimeError("could not draw a distinct span")


def _word_counts(rng: random.Random, n: int, mean: int) -> list[int]:
    counts = [mean] * n
    for i in range(n // 2):
        delta = rng.randrange(-150, 151)
        counts[i] += delta
        counts[n - 1 - i] -= delta
    assert sum(counts) == mean * n
    return counts


def build_corpus(
    rng: random.Random, n: int, mean_words: int, dataset: DatasetId, prefix: str
) -> list[AnnotationRecord]:
    records = []
    for i, count in enumerate(_word_counts(rng, n, mean_words)):
        tokens = _tokens(rng, count)
        text = unicodedata.normalize("NFC", " ".join(tokens))
        tokens = text.split()
        taken: set[str] = set()
        elements = {}
        for kind in ELEMENT_ORDER:
            spans = [_span(rng, tokens, taken, (2, 6))]
            # A second span for some articles exercises multi-span scoring.
            if kind is ElementKind.WHAT and i % 7 == 3:
                spans.append(_span(rng, tokens, taken, (2, 4)))
            elements[kind] = spans
        article = NewsArticle(
            id=f"{prefix}-{i:04d}",
            dataset=dataset,
            category=NewsCategory((i % 6) + 1),
            text=text,
        )
        records.append(AnnotationRecord(article=article, elements=elements))
    return records


def _predicted_elements(
    record: AnnotationRecord, index: int, total: int, degrade: bool
) -> dict[ElementKind, list[str]]:
    predicted = {}
    for kind in ELEMENT_ORDER:
        invalid_below = total - VALID_COUNTS[kind] if total == 100 else 0
        if index < invalid_below:
            predicted[kind] = []
            continue
        spans = list(record.elements[kind])
        if degrade or (kind is ElementKind.WHAT and index % 3 == 0) or (
            kind is ElementKind.WHY and index % 4 == 0
        ):
            spans = [
                " ".join(span.split()[:-1]) if len(span.split()) >= 3 else span
                for span in spans
            ]
        predicted[kind] = spans
    return predicted


def _render_response(predicted: dict[ElementKind, list[str]], index: int, style_mix: bool) -> str:
    if style_mix and index in KEY_LINE_INDICES:
        lines = []
        for kind in ELEMENT_ORDER:
            value = " ".join(predicted[kind])
            lines.append(f"{kind.title}: {value}".rstrip())
        return "\n".join(lines)
    if style_mix and index in QUOTED_BLOCK_INDICES:
        parts = [
            f'"{kind.title}": {json.dumps(predicted[kind], ensure_ascii=False)}'
            for kind in ELEMENT_ORDER
        ]
        return ",\n".join(parts)
    return serialize_elements(predicted)


def build_replay(
    records: list[AnnotationRecord], style_mix: bool, degrade: bool
) -> dict[str, str]:
    total = len(records)
    replay = {}
    for index, record in enumerate(records):
        predicted = _predicted_elements(record, index, total, degrade)
        replay[record.id] = _render_response(predicted, index, style_mix)
    return replay


def build_planted_violations(rng: random.Random) -> list[AnnotationRecord]:
    records = build_corpus(rng, 4, 120, DatasetId.CNNDM, "planted")
    out = []
    for index, record in enumerate(records):
        elements = {kind: list(spans) for kind, spans in record.elements.items()}
        tokens = record.article.text.split()
        if index == 0:
            elements[ElementKind.WHAT] = ["this span appears nowhere in the article"]
        elif index == 1:
            shared = " ".join(tokens[3:6])
            elements[ElementKind.WHEN] = [shared]
            elements[ElementKind.WHERE] = [shared]
        elif index == 2:
            shared = " ".join(tokens[10:14])
            elements[ElementKind.WHY] = [shared]
            elements[ElementKind.WHO] = [shared]
        out.append(AnnotationRecord(article=record.article, elements=elements))
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=Path(__file__).resolve().parent.parent / "fixtures")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rng = random.Random(20240901)
    cnndm = build_corpus(rng, 100, 579, DatasetId.CNNDM, "cnndm")
    save_corpus(cnndm, out / "cnndm_sample.jsonl")
    replay = build_replay(cnndm, style_mix=True, degrade=False)
    (out / "replay_cnndm.json").write_text(
        json.dumps(replay, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )

    planted = build_planted_violations(random.Random(7))
    save_corpus(planted, out / "planted_violations.jsonl")

    xsum_rng = random.Random(42)
    xsum = build_corpus(xsum_rng, 30, 523, DatasetId.XSUM, "xsum")
    save_corpus(xsum, out / "xsum_sample.jsonl")
    (out / "replay_xsum_indomain.json").write_text(
        json.dumps(build_replay(xsum, style_mix=False, degrade=False), ensure_ascii=False, indent=1)
        + "\n",
        encoding="utf-8",
    )
    degraded = build_replay(xsum, style_mix=False, degrade=True)
    # The transferred model also misses three answers outright.
    for index, record in enumerate(xsum):
        if index < 3:
            payload = json.loads(degraded[record.id])
            payload["why"] = []
            degraded[record.id] = serialize_elements(
                {kind: payload[kind.value] for kind in ELEMENT_ORDER}
            )
    (out / "replay_xsum_cnnft.json").write_text(
        json.dumps(degraded, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )

    (out / "endpoint.example.json").write_text(
        json.dumps(
            {
                "name": "hosted-example",
                "base_url": "https://api.example.com/v1",
                "model": "example-chat-model",
                "api_key_env": "FIVEW1H_API_KEY",
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"fixtures written to {out}")


if __name__ == "__main__":
    main()
