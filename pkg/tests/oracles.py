"""Brute-force reference implementations, kept independent of the package
internals they check."""
from __future__ import annotations

from itertools import combinations
from typing import Sequence

import numpy as np


def ngram_overlap_counts(gold: Sequence[str], gen: Sequence[str], n: int) -> tuple[int, int, int]:
    """(clipped overlap, |gold n-grams|, |gen n-grams|) by explicit counting."""
    gold_grams = [tuple(gold[i : i + n]) for i in range(len(gold) - n + 1)]
    gen_grams = [tuple(gen[i : i + n]) for i in range(len(gen) - n + 1)]
    overlap = 0
    for gram in set(gold_grams):
        overlap += min(gold_grams.count(gram), gen_grams.count(gram))
    return overlap, len(gold_grams), len(gen_grams)


def rouge_n_reference(gold: Sequence[str], gen: Sequence[str], n: int) -> tuple[float, float, float]:
    overlap, gold_total, gen_total = ngram_overlap_counts(gold, gen, n)
    recall = overlap / gold_total if gold_total else 0.0
    precision = overlap / gen_total if gen_total else 0.0
    f1 = 2 * recall * precision / (recall + precision) if recall + precision else 0.0
    return recall, precision, f1


def _is_subsequence(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    position = 0
    for token in haystack:
        if position < len(needle) and token == needle[position]:
            position += 1
    return position == len(needle)


def lcs_by_enumeration(gold: Sequence[str], gen: Sequence[str]) -> int:
    """Exhaustive LCS: try every subsequence of the shorter side, longest first.

    Exponential; callers keep token lengths <= 8.
    """
    short, long = (gold, gen) if len(gold) <= len(gen) else (gen, gold)
    if len(short) > 12:
        raise ValueError("enumeration oracle is limited to short sequences")
    for length in range(len(short), 0, -1):
        for indices in combinations(range(len(short)), length):
            candidate = [short[i] for i in indices]
            if _is_subsequence(candidate, long):
                return length
    return 0


def rouge_l_reference(gold: Sequence[str], gen: Sequence[str]) -> tuple[float, float, float]:
    lcs = lcs_by_enumeration(gold, gen) if gold and gen else 0
    recall = lcs / len(gold) if gold else 0.0
    precision = lcs / len(gen) if gen else 0.0
    f1 = 2 * recall * precision / (recall + precision) if recall + precision else 0.0
    return recall, precision, f1


def textrank_linear_solve(graph: np.ndarray, damping: float) -> np.ndarray:
    """Dense fixed point of the damped recurrence via a linear-system solve."""
    graph = np.asarray(graph, dtype=float)
    k = graph.shape[0]
    out_weights = graph.sum(axis=1)
    denom = np.where(out_weights > 0.0, out_weights, 1.0)
    contributions = graph / denom[np.newaxis, :]
    return np.linalg.solve(np.eye(k) - damping * contributions, (1.0 - damping) * np.ones(k))


def textrank_loop_reference(graph: Sequence[Sequence[float]], damping: float, tol: float = 1e-12) -> list[float]:
    """Plain-Python synchronous iteration of the recurrence, run to ``tol``."""
    k = len(graph)
    out_weights = [sum(graph[j][m] for m in range(k) if m != j) for j in range(k)]
    scores = [1.0] * k
    for _ in range(10000):
        updated = []
        for i in range(k):
            incoming = 0.0
            for j in range(k):
                if j == i or out_weights[j] == 0.0:
                    continue
                incoming += graph[i][j] / out_weights[j] * scores[j]
            updated.append((1.0 - damping) + damping * incoming)
        residual = max(abs(u - s) for u, s in zip(updated, scores))
        scores = updated
        if residual < tol:
            break
    return scores
