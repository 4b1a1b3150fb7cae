"""Slow, obviously-correct reference implementations used as test oracles.

None of these import the code under test.
"""
from __future__ import annotations

import math
import random
import re

import numpy as np

_TOKEN = re.compile(r"[^\W_]+|[^\w\s]|_")


def toks(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def words(text: str) -> list[str]:
    return [t for t in toks(text) if t.isalnum()]


def _match_count(ref_units: list, cand_units: list) -> int:
    pool = list(ref_units)
    hit = 0
    for u in cand_units:
        if u in pool:
            pool.remove(u)
            hit += 1
    return hit


def _prf(hit: int, n_ref: int, n_cand: int) -> tuple[float, float, float]:
    r = hit / n_ref if n_ref else 0.0
    p = hit / n_cand if n_cand else 0.0
    f = 2 * r * p / (r + p) if r + p else 0.0
    return r, p, f


def rouge_n(ref: list[str], cand: list[str], n: int) -> tuple[float, float, float]:
    rg = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
    cg = [tuple(cand[i:i + n]) for i in range(len(cand) - n + 1)]
    return _prf(_match_count(rg, cg), len(rg), len(cg))


def _su4(ws: list[str]) -> list[tuple]:
    out = [(w,) for w in ws]
    for i in range(len(ws)):
        for j in range(len(ws)):
            if 0 < j - i <= 5:
                out.append((ws[i], ws[j]))
    return out


def rouge_su4(ref: list[str], cand: list[str]) -> tuple[float, float, float]:
    ru, cu = _su4(ref), _su4(cand)
    return _prf(_match_count(ru, cu), len(ru), len(cu))


def tf_cosine(a: str, b: str, idf: dict[str, float] | None = None) -> float:
    va, vb = {}, {}
    for vec, text in ((va, a), (vb, b)):
        for t in words(text):
            vec[t] = vec.get(t, 0) + 1
        for t in list(vec):
            vec[t] *= (idf or {}).get(t, 1.0)
    dot = sum(va[t] * vb.get(t, 0.0) for t in va)
    na = math.sqrt(sum(x * x for x in va.values()))
    nb = math.sqrt(sum(x * x for x in vb.values()))
    return dot / (na * nb) if na and nb else 0.0


def lexrank_dense(sentences: list[str], threshold=0.1, damping=0.85, squarings=60) -> np.ndarray:
    docs = [words(s) for s in sentences]
    n = len(docs)
    vocab = sorted({t for d in docs for t in d})
    df = {t: sum(1 for d in docs if t in d) for t in vocab}
    idf = {t: math.log(1 + n / df[t]) for t in vocab}
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            c = tf_cosine(sentences[i], sentences[j], idf)
            if c >= threshold and c > 0:
                A[i, j] = c
    M = np.zeros((n, n))
    for i in range(n):
        M[i] = A[i] / A[i].sum() if A[i].sum() > 0 else 1.0 / n
    G = damping * M + (1 - damping) / n
    for _ in range(squarings):
        G = G @ G
        G /= G.sum(axis=1, keepdims=True)
    p = G[0]
    return p / p.sum()


def cluster_size_scan(own: int, neighbors: list[int], target: int) -> int:
    best = None
    for n in range(1, len(neighbors) + 2):
        gap = abs(own + sum(neighbors[: n - 1]) - target)
        if best is None or gap < best[0]:
            best = (gap, n)
    return best[1]


def overlap_ratio(query: str, sentence: str) -> float:
    q = set(words(query.replace("[MASK]", " ")))
    s = words(sentence)
    return sum(1 for w in s if w in q) / len(s) if s else 0.0


def planted_pairs(n: int, seed: int, vocab_size: int = 300):
    """Query/sentence pairs with y = 0.8 * overlap_ratio + 0.1 + N(0, 0.02)."""
    rng = random.Random(seed)
    vocab = [f"w{i}" for i in range(vocab_size)]
    out = []
    for _ in range(n):
        q = rng.sample(vocab, 12)
        query = " ".join(w if rng.random() > 0.3 else "[MASK]" for w in q)
        frac = rng.random()
        sent = " ".join(rng.choice(q) if rng.random() < frac else rng.choice(vocab)
                        for _ in range(rng.randint(5, 24)))
        y = 0.8 * overlap_ratio(query, sent) + 0.1 + rng.gauss(0, 0.02)
        out.append((query, sent, y))
    return out
