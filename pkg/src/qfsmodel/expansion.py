"""LexRank centrality and query narrative expansion for short queries."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .text import as_tokens, cosine, smooth_idf, vectorize_tfidf, word_count

DEFAULT_WORD_BUDGET = 100


@dataclass(frozen=True)
class CentralityConfig:
    similarity_threshold: float = 0.1
    damping: float = 0.85
    epsilon: float = 1e-6
    max_iterations: int = 100

    def __post_init__(self):
        if not 0.0 <= self.similarity_threshold < 1.0:
            raise ValueError("similarity_threshold must lie in [0, 1)")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def similarity_graph(sentences: Sequence, cfg: CentralityConfig, idf: Mapping[str, float] | None = None) -> np.ndarray:
    toks = [as_tokens(s) for s in sentences]
    if idf is None:
        idf = smooth_idf(toks)
    vecs = [vectorize_tfidf(t, idf) for t in toks]
    n = len(vecs)
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            c = cosine(vecs[i], vecs[j])
            if c >= cfg.similarity_threshold and c > 0.0:
                A[i, j] = A[j, i] = c
    return A


def transition_matrix(A: np.ndarray) -> np.ndarray:
    """Row-normalize; rows without edges become uniform."""
    n = A.shape[0]
    M = np.empty_like(A, dtype=np.float64)
    for i in range(n):
        total = A[i].sum()
        M[i] = A[i] / total if total > 0 else 1.0 / n
    return M


def lexrank_scores(sentences: Sequence, cfg: CentralityConfig = CentralityConfig(),
                   idf: Mapping[str, float] | None = None) -> list[float]:
    """Stationary distribution of the damped random walk over the similarity graph.

    Iteration stops once ``d/(1-d) * ||p_k - p_{k-1}||_1`` drops below
    ``epsilon``; for a chain contracting at rate ``d`` that quantity bounds the
    remaining L1 error, so the result is within ``epsilon`` of the fixed point.
    """
    n = len(sentences)
    if n == 0:
        raise ValueError("need at least one sentence")
    M = transition_matrix(similarity_graph(sentences, cfg, idf))
    d = cfg.damping
    p = np.full(n, 1.0 / n)
    bound = d / (1.0 - d)
    for _ in range(cfg.max_iterations):
        nxt = d * (M.T @ p) + (1.0 - d) / n
        delta = np.abs(nxt - p).sum()
        p = nxt
        if bound * delta < cfg.epsilon:
            break
    p = p / p.sum()
    return p.tolist()


def centrality_order(scores: Sequence[float]) -> list[int]:
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def expand_query(query: str, cluster_sentences: Sequence[str], word_budget: int = DEFAULT_WORD_BUDGET,
                 cfg: CentralityConfig = CentralityConfig()) -> str:
    """Append the most central cluster sentences that fit in ``word_budget`` words.

    Sentences that do not fit are skipped rather than ending the scan.
    """
    if word_budget < 1:
        raise ValueError("word_budget must be >= 1")
    if not cluster_sentences:
        return query
    scores = lexrank_scores(cluster_sentences, cfg)
    return append_by_rank(query, cluster_sentences, centrality_order(scores), word_budget)


def append_by_rank(query: str, sentences: Sequence[str], order: Sequence[int], word_budget: int) -> str:
    used = 0
    picked = []
    for i in order:
        wc = word_count(sentences[i])
        if wc and used + wc <= word_budget:
            picked.append(sentences[i])
            used += wc
    return " ".join([query, *picked]) if picked else query
