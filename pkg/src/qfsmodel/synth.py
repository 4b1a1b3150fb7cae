"""Synthetic multi-document clusters from single-document data.

Each seed summary is used as a query against an index of all summaries
(hashed unigram+bigram TF-IDF); the articles behind the nearest summaries join
the seed article, and their summaries are concatenated and deduplicated.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .supervision import CorpusRecord, Document
from .text import (
    HASH_DIM, SparseVector, as_tokens, cosine, hashed_features, tokenize,
    vectorize_hashed_bigrams, vectorize_tfidf, word_count,
)

DEFAULT_POOL = 10
DEFAULT_TARGET_WORDS = 250
DEFAULT_DEDUP_THRESHOLD = 0.6


@dataclass
class SummaryIndex:
    ids: list[str]
    idf: dict[str, float]
    vectors: list[SparseVector]
    dim: int = HASH_DIM

    def __post_init__(self):
        self._pos = {i: k for k, i in enumerate(self.ids)}
        self._norms = [v.norm() for v in self.vectors]
        self._postings: dict[int, list[tuple[int, float]]] = {}
        for k, v in enumerate(self.vectors):
            for dim_idx, w in v.entries.items():
                self._postings.setdefault(dim_idx, []).append((k, w))

    def position(self, summary_id: str) -> int:
        try:
            return self._pos[summary_id]
        except KeyError:
            raise KeyError(f"unknown summary id {summary_id!r}") from None

    def to_bytes(self) -> bytes:
        payload = {
            "dim": self.dim,
            "ids": self.ids,
            "idf": sorted(self.idf.items()),
            "vectors": [sorted(v.entries.items()) for v in self.vectors],
        }
        return json.dumps(payload, separators=(",", ":")).encode("utf-8")


def build_index(records: Sequence[tuple[str, Sequence[str]]], dim: int = HASH_DIM) -> SummaryIndex:
    if len(records) < 2:
        raise ValueError("need at least two summaries to build an index")
    ids = [str(i) for i, _ in records]
    dupes = sorted(k for k, c in Counter(ids).items() if c > 1)
    if dupes:
        raise ValueError(f"duplicate summary ids: {dupes[:5]}")
    toks = [as_tokens(t) for _, t in records]
    df: Counter[str] = Counter()
    for t in toks:
        df.update(set(hashed_features(t)))
    n = len(records)
    idf = {f: math.log(n / c) for f, c in df.items()}
    vectors = [vectorize_hashed_bigrams(t, dim, idf) for t in toks]
    return SummaryIndex(ids, idf, vectors, dim)


def neighbor_scores(index: SummaryIndex, query_id: str) -> list[tuple[str, float]]:
    """Cosine of every other summary against ``query_id``, best first, ties by id."""
    q = index.position(query_id)
    acc: dict[int, float] = {}
    for dim_idx, w in sorted(index.vectors[q].entries.items()):
        for k, v in index._postings[dim_idx]:
            acc[k] = acc.get(k, 0.0) + w * v
    qn = index._norms[q]
    out = []
    for k, sid in enumerate(index.ids):
        if k == q:
            continue
        denom = qn * index._norms[k]
        score = min(1.0, acc.get(k, 0.0) / denom) if denom > 0 else 0.0
        out.append((sid, score))
    out.sort(key=lambda x: (-x[1], x[0]))
    return out


def retrieve_neighbors(index: SummaryIndex, query_id: str, pool: int = DEFAULT_POOL) -> list[str]:
    if pool < 1:
        raise ValueError("pool must be >= 1")
    return [sid for sid, _ in neighbor_scores(index, query_id)[:pool]]


def choose_cluster_size(own_length: int, neighbor_lengths: Sequence[int], target: int = DEFAULT_TARGET_WORDS) -> int:
    """Cluster size whose concatenated summary length is closest to ``target``.

    Ties go to the smaller cluster.
    """
    if target < 1:
        raise ValueError("target must be >= 1")
    best_n, best_gap = 1, abs(own_length - target)
    total = own_length
    for n, extra in enumerate(neighbor_lengths, start=2):
        total += extra
        gap = abs(total - target)
        if gap < best_gap:
            best_n, best_gap = n, gap
    return best_n


def dedup_sentences(sentences: Sequence[str], threshold: float = DEFAULT_DEDUP_THRESHOLD,
                    idf: Mapping[str, float] | None = None) -> list[str]:
    """Front-to-back scan keeping sentences below ``threshold`` cosine to all kept ones."""
    kept: list[str] = []
    vecs: list[SparseVector] = []
    for s in sentences:
        v = vectorize_tfidf(tokenize(s), idf)
        if any(cosine(v, u) >= threshold for u in vecs):
            continue
        kept.append(s)
        vecs.append(v)
    return kept


@dataclass
class SyntheticCluster:
    cluster_id: str
    documents: list[Document]
    raw_summary: list[str]
    final_summary: list[str]
    size: int

    def to_record(self) -> CorpusRecord:
        return CorpusRecord(self.cluster_id, self.documents, self.final_summary, {"synthetic_size": self.size})


def form_cluster(record: CorpusRecord, retrieved: Sequence[CorpusRecord], n_i: int,
                 dedup_threshold: float = DEFAULT_DEDUP_THRESHOLD) -> SyntheticCluster:
    if n_i < 1 or n_i - 1 > len(retrieved):
        raise ValueError(f"cluster size {n_i} inconsistent with {len(retrieved)} retrieved records")
    members = [record, *retrieved[: n_i - 1]]
    documents = [Document(f"{m.cluster_id}/{d.doc_id}", list(d.sentences)) for m in members for d in m.documents]
    raw = [s for m in members for s in m.summary]
    return SyntheticCluster(record.cluster_id, documents, raw, dedup_sentences(raw, dedup_threshold), n_i)


def build_synthetic(records: Sequence[CorpusRecord], pool: int = DEFAULT_POOL,
                    target: int = DEFAULT_TARGET_WORDS,
                    dedup_threshold: float = DEFAULT_DEDUP_THRESHOLD) -> list[SyntheticCluster]:
    by_id = {r.cluster_id: r for r in records}
    index = build_index([(r.cluster_id, tokenize(" ".join(r.summary))) for r in records])
    lengths = {r.cluster_id: word_count(" ".join(r.summary)) for r in records}
    out = []
    for r in records:
        neighbors = retrieve_neighbors(index, r.cluster_id, pool)
        n = choose_cluster_size(lengths[r.cluster_id], [lengths[i] for i in neighbors], target)
        out.append(form_cluster(r, [by_id[i] for i in neighbors], n, dedup_threshold))
    return out
