"""ROUGE-1/2/L scoring between gold and generated titles, plus corpus aggregation.

Scores are kept as fractions in [0, 1]; report layers convert to percent.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

# Maximal runs of Unicode alphanumerics; underscores and punctuation split tokens.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def normalize_tokens(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class RougeScore:
    recall: float
    precision: float
    f1: float

    @staticmethod
    def from_recall_precision(recall: float, precision: float) -> "RougeScore":
        denom = recall + precision
        f1 = 2.0 * recall * precision / denom if denom > 0 else 0.0
        return RougeScore(recall=recall, precision=precision, f1=f1)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    if len(tokens) < n:
        return Counter()
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(gold: Sequence[str], gen: Sequence[str], n: int) -> RougeScore:
    """N-gram overlap with clipped (multiset-intersection) counts.

    A side with zero n-grams yields 0 for its component.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    gold_grams = _ngram_counts(gold, n)
    gen_grams = _ngram_counts(gen, n)
    overlap = sum((gold_grams & gen_grams).values())
    gold_total = sum(gold_grams.values())
    gen_total = sum(gen_grams.values())
    recall = overlap / gold_total if gold_total else 0.0
    precision = overlap / gen_total if gen_total else 0.0
    return RougeScore.from_recall_precision(recall, precision)


def _lcs_length(xs: Sequence[str], ys: Sequence[str]) -> int:
    # Two-row dynamic programming.
    if not xs or not ys:
        return 0
    prev = [0] * (len(ys) + 1)
    for x in xs:
        cur = [0] * (len(ys) + 1)
        for j, y in enumerate(ys, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(gold: Sequence[str], gen: Sequence[str]) -> RougeScore:
    """Token-level longest-common-subsequence recall/precision/F1."""
    lcs = _lcs_length(gold, gen)
    recall = lcs / len(gold) if gold else 0.0
    precision = lcs / len(gen) if gen else 0.0
    return RougeScore.from_recall_precision(recall, precision)


@dataclass(frozen=True)
class PairScores:
    """ROUGE-1/2/L for one (gold, generated) title pair."""

    rouge1: RougeScore
    rouge2: RougeScore
    rouge_l: RougeScore


def score_pair(gold_text: str, gen_text: str) -> PairScores:
    gold = normalize_tokens(gold_text)
    gen = normalize_tokens(gen_text)
    return PairScores(
        rouge1=rouge_n(gold, gen, 1),
        rouge2=rouge_n(gold, gen, 2),
        rouge_l=rouge_l(gold, gen),
    )


@dataclass(frozen=True)
class MeanScore:
    f1: float
    recall: float


@dataclass(frozen=True)
class LanguageMeans:
    rouge1: MeanScore
    rouge2: MeanScore
    rouge_l: MeanScore


@dataclass(frozen=True)
class CorpusReport:
    """Per-language mean scores plus their unweighted (macro) average."""

    per_language: dict[str, LanguageMeans]
    average: LanguageMeans


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _language_means(scores: Sequence[PairScores]) -> LanguageMeans:
    return LanguageMeans(
        rouge1=MeanScore(
            f1=_mean([s.rouge1.f1 for s in scores]),
            recall=_mean([s.rouge1.recall for s in scores]),
        ),
        rouge2=MeanScore(
            f1=_mean([s.rouge2.f1 for s in scores]),
            recall=_mean([s.rouge2.recall for s in scores]),
        ),
        rouge_l=MeanScore(
            f1=_mean([s.rouge_l.f1 for s in scores]),
            recall=_mean([s.rouge_l.recall for s in scores]),
        ),
    )


def aggregate(scores_by_language: Mapping[str, Sequence[PairScores]]) -> CorpusReport:
    """Macro-aggregate pair scores: per-language means, then their unweighted mean."""
    if not scores_by_language:
        raise ValueError("no scores to aggregate")
    per_language: dict[str, LanguageMeans] = {}
    for language, scores in scores_by_language.items():
        if not scores:
            raise ValueError(f"language {language!r} has no scored pairs")
        per_language[language] = _language_means(scores)
    means = list(per_language.values())
    average = LanguageMeans(
        rouge1=MeanScore(
            f1=_mean([m.rouge1.f1 for m in means]),
            recall=_mean([m.rouge1.recall for m in means]),
        ),
        rouge2=MeanScore(
            f1=_mean([m.rouge2.f1 for m in means]),
            recall=_mean([m.rouge2.recall for m in means]),
        ),
        rouge_l=MeanScore(
            f1=_mean([m.rouge_l.f1 for m in means]),
            recall=_mean([m.rouge_l.recall for m in means]),
        ),
    )
    return CorpusReport(per_language=per_language, average=average)
