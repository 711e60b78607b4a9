"""Candidate title ranking: TF-IDF cosine-similarity graph + damped fixed-point scoring.

Each of the K candidate titles becomes a graph node; edge weights are cosine
similarities between sparse TF-IDF vectors built over the candidate-set
vocabulary. Relevance scores are iterated to a fixed point of

    S_i = (1 - a) + a * sum_{j != i} (l_ij / sum_{k != j} l_jk) * S_j

with damping ``a`` defaulting to 0.23. The iteration is synchronous from an
all-ones start; a node with zero similarity to every other node contributes
nothing and settles at exactly 1 - a.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .metrics import normalize_tokens

DEFAULT_DAMPING = 0.23
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 200


def tfidf_vectors(titles: Sequence[str], log_base: float = math.e) -> list[dict[str, float]]:
    """Sparse TF-IDF weights per title: (log f + 1) * (log(K / K_token) + 1).

    ``f`` is the token's raw count in the title and ``K_token`` the number of
    titles containing it. Logarithms are natural by default.
    """
    token_lists = [normalize_tokens(title) for title in titles]
    k_total = len(titles)
    doc_freq: dict[str, int] = {}
    for tokens in token_lists:
        for token in set(tokens):
            doc_freq[token] = doc_freq.get(token, 0) + 1
    vectors: list[dict[str, float]] = []
    for tokens in token_lists:
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        vectors.append(
            {
                token: (math.log(count, log_base) + 1.0)
                * (math.log(k_total / doc_freq[token], log_base) + 1.0)
                for token, count in counts.items()
            }
        )
    return vectors


def cosine(u: Mapping[str, float], v: Mapping[str, float]) -> float:
    """Cosine similarity over the sparse key union; 0 if either norm is 0."""
    norm_u = math.sqrt(sum(w * w for w in u.values()))
    norm_v = math.sqrt(sum(w * w for w in v.values()))
    if norm_u == 0.0 or norm_v == 0.0:
        return 0.0
    # Sorted keys keep the summation order independent of dict construction.
    dot = sum(u[token] * v[token] for token in sorted(u) if token in v)
    return dot / (norm_u * norm_v)


def similarity_graph(vectors: Sequence[Mapping[str, float]]) -> np.ndarray:
    """Symmetric K x K cosine matrix with zero diagonal, clamped to [0, 1]."""
    k = len(vectors)
    graph = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            weight = min(max(cosine(vectors[i], vectors[j]), 0.0), 1.0)
            graph[i, j] = weight
            graph[j, i] = weight
    return graph


@dataclass(frozen=True)
class RankingResult:
    scores: tuple[float, ...]
    best_index: int
    iterations: int
    residual: float
    converged: bool


def _check_graph(graph: np.ndarray) -> np.ndarray:
    graph = np.asarray(graph, dtype=float)
    if graph.ndim != 2 or graph.shape[0] != graph.shape[1]:
        raise ValueError(f"similarity graph must be square, got shape {graph.shape}")
    if np.any(np.abs(np.diagonal(graph)) > 0):
        raise ValueError("similarity graph must have a zero diagonal")
    if not np.allclose(graph, graph.T, atol=1e-12, rtol=0.0):
        raise ValueError("similarity graph must be symmetric")
    if np.any(graph < 0):
        raise ValueError("similarity weights must be nonnegative")
    return graph


def textrank(
    graph: np.ndarray,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> RankingResult:
    """Iterate the damped relevance recurrence to a fixed point.

    Scores start at 1.0 and are updated synchronously until the max absolute
    per-node change drops below ``tol``; non-convergence within ``max_iter``
    returns the last iterate with ``converged`` False.
    """
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must lie in (0, 1), got {damping}")
    graph = _check_graph(graph)
    k = graph.shape[0]
    out_weights = graph.sum(axis=1)
    # Contribution matrix M[i, j] = l_ij / sum_k l_jk; columns of nodes with
    # zero out-weight are all-zero already (the graph is symmetric).
    denom = np.where(out_weights > 0.0, out_weights, 1.0)
    contributions = graph / denom[np.newaxis, :]
    scores = np.ones(k)
    residual = math.inf
    iterations = 0
    converged = False
    for _ in range(max_iter):
        updated = (1.0 - damping) + damping * (contributions @ scores)
        residual = float(np.max(np.abs(updated - scores))) if k else 0.0
        scores = updated
        iterations += 1
        if residual < tol:
            converged = True
            break
    return RankingResult(
        scores=tuple(float(s) for s in scores),
        best_index=int(np.argmax(scores)) if k else 0,
        iterations=iterations,
        residual=residual,
        converged=converged,
    )


def select_best(
    candidates: Sequence[str],
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[str, RankingResult]:
    """Rank a candidate set and return the highest-scoring title.

    Ties resolve to the lowest candidate index, i.e. the generator's own
    earlier-ranked candidate.
    """
    if not candidates:
        raise ValueError("candidate set is empty")
    graph = similarity_graph(tfidf_vectors(candidates))
    result = textrank(graph, damping=damping, tol=tol, max_iter=max_iter)
    return candidates[result.best_index], result
