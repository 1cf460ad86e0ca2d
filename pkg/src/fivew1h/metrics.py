"""From-scratch ROUGE-1/2/L and BLEU-4 engines for per-element scoring.

All functions operate on pre-normalized token sequences and emit raw scores
in [0, 1]; the report layer is the only place values are scaled to percent.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum

# A normalized token sequence: lowercase tokens, no whitespace inside tokens.
TokenSeq = list[str]

_TOKEN_RE = re.compile(r"\w+(?:[-']\w+)*|[^\w\s]")


def normalize_tokens(text: str) -> TokenSeq:
    """Lowercase, detach punctuation into separate tokens, collapse whitespace.

    Intra-word hyphens and apostrophes are kept ("tyne-wear" stays one token);
    every other non-word character becomes its own token.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class ScoreTriple:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "ScoreTriple":
        if precision + recall == 0:
            return cls(precision, recall, 0.0)
        return cls(precision, recall, 2 * precision * recall / (precision + recall))


@dataclass(frozen=True)
class MetricScores:
    """ROUGE-1/2/L triples plus BLEU-4 for one (prediction, reference) pair."""

    rouge1: ScoreTriple
    rouge2: ScoreTriple
    rougeL: ScoreTriple
    bleu4: float

    def as_flat_dict(self) -> dict[str, float]:
        return {
            "rouge1_p": self.rouge1.precision,
            "rouge1_r": self.rouge1.recall,
            "rouge1_f": self.rouge1.f1,
            "rouge2_p": self.rouge2.precision,
            "rouge2_r": self.rouge2.recall,
            "rouge2_f": self.rouge2.f1,
            "rougeL_p": self.rougeL.precision,
            "rougeL_r": self.rougeL.recall,
            "rougeL_f": self.rougeL.f1,
            "bleu4": self.bleu4,
        }


def _ngrams(tokens: TokenSeq, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: TokenSeq, reference: TokenSeq, n: int) -> ScoreTriple:
    """Clipped n-gram overlap precision/recall/F1."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    precision = overlap / cand_total if cand_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    return ScoreTriple.from_pr(precision, recall)


def lcs_length(a: TokenSeq, b: TokenSeq) -> int:
    """Longest common subsequence length, O(len(a) * len(b)) with a rolling row."""
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b):
            if x == y:
                curr.append(prev[j] + 1)
            else:
                curr.append(max(prev[j + 1], curr[j]))
        prev = curr
    return prev[-1]


def rouge_l(candidate: TokenSeq, reference: TokenSeq) -> ScoreTriple:
    """LCS-based precision/recall/F1 (beta = 1)."""
    lcs = lcs_length(candidate, reference)
    precision = lcs / len(candidate) if candidate else 0.0
    recall = lcs / len(reference) if reference else 0.0
    return ScoreTriple.from_pr(precision, recall)


def bleu4(candidate: TokenSeq, references: list[TokenSeq]) -> float:
    """Sentence BLEU-4: geometric mean of modified 1..4-gram precisions with a
    brevity penalty.

    Clipping is against the maximum count across references. Smoothing: for
    n >= 2 a zero clipped count contributes (0 + 1) / (h_n + 1); the unigram
    precision is never smoothed, so zero unigram overlap forces a 0 score.
    """
    if not references:
        raise ValueError("bleu4 requires at least one reference")
    if not candidate:
        return 0.0

    log_sum = 0.0
    for n in range(1, 5):
        cand = _ngrams(candidate, n)
        clipped = 0
        total = sum(cand.values())
        if cand:
            max_ref: Counter = Counter()
            for ref in references:
                for gram, count in _ngrams(ref, n).items():
                    if count > max_ref[gram]:
                        max_ref[gram] = count
            clipped = sum(min(count, max_ref[gram]) for gram, count in cand.items())
        if n == 1:
            if clipped == 0:
                return 0.0
            p_n = clipped / total
        elif clipped == 0:
            p_n = 1.0 / (total + 1)
        else:
            p_n = clipped / total
        log_sum += 0.25 * math.log(p_n)

    cand_len = len(candidate)
    # Effective reference length: closest to the candidate, ties to the shorter.
    ref_len = min((abs(len(r) - cand_len), len(r)) for r in references)[1]
    brevity = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * math.exp(log_sum)


class ScoreMode(Enum):
    CONCAT = "concat"
    BEST_MATCH = "best-match"


def _score_pair(candidate: TokenSeq, reference: TokenSeq) -> MetricScores:
    return MetricScores(
        rouge1=rouge_n(candidate, reference, 1),
        rouge2=rouge_n(candidate, reference, 2),
        rougeL=rouge_l(candidate, reference),
        bleu4=bleu4(candidate, [reference]),
    )


_PERFECT = MetricScores(
    rouge1=ScoreTriple(1.0, 1.0, 1.0),
    rouge2=ScoreTriple(1.0, 1.0, 1.0),
    rougeL=ScoreTriple(1.0, 1.0, 1.0),
    bleu4=1.0,
)

_ZERO = MetricScores(
    rouge1=ScoreTriple(0.0, 0.0, 0.0),
    rouge2=ScoreTriple(0.0, 0.0, 0.0),
    rougeL=ScoreTriple(0.0, 0.0, 0.0),
    bleu4=0.0,
)


def score_element(
    predicted: list[str],
    gold: list[str],
    mode: ScoreMode = ScoreMode.CONCAT,
) -> MetricScores:
    """Score one element's predicted span list against the gold span list.

    Concat (default) joins each list in order with single spaces and scores
    the two resulting sequences. BestMatch pairs every predicted span with its
    highest-ROUGE-L gold span and averages the per-pair scores.

    Conventions: both lists empty -> all scores 1; exactly one side empty -> 0.
    """
    if not predicted and not gold:
        return _PERFECT
    if not predicted or not gold:
        return _ZERO

    if mode is ScoreMode.CONCAT:
        candidate = normalize_tokens(" ".join(predicted))
        reference = normalize_tokens(" ".join(gold))
        if not candidate and not reference:
            return _PERFECT
        return _score_pair(candidate, reference)

    gold_tokens = [normalize_tokens(span) for span in gold]
    pair_scores = []
    for span in predicted:
        candidate = normalize_tokens(span)
        best = max(gold_tokens, key=lambda ref: rouge_l(candidate, ref).f1)
        pair_scores.append(_score_pair(candidate, best))
    k = len(pair_scores)

    def mean(get) -> float:
        return sum(get(s) for s in pair_scores) / k

    return MetricScores(
        rouge1=ScoreTriple(
            mean(lambda s: s.rouge1.precision),
            mean(lambda s: s.rouge1.recall),
            mean(lambda s: s.rouge1.f1),
        ),
        rouge2=ScoreTriple(
            mean(lambda s: s.rouge2.precision),
            mean(lambda s: s.rouge2.recall),
            mean(lambda s: s.rouge2.f1),
        ),
        rougeL=ScoreTriple(
            mean(lambda s: s.rougeL.precision),
            mean(lambda s: s.rougeL.recall),
            mean(lambda s: s.rougeL.f1),
        ),
        bleu4=mean(lambda s: s.bleu4),
    )
