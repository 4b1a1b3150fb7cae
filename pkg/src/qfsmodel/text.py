"""Tokenization, sentence splitting and sparse vectors shared by the pipeline.

Everything here is pure and deterministic: equal inputs give equal outputs on
every platform, which is what makes the downstream JSONL stages reproducible.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_")
_WORD_RE = re.compile(r"[^\W_]+")
_BOUNDARY_RE = re.compile(r"[.?!]\s+")
_OPEN_QUOTES = "\"'“‘("

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

HASH_DIM = 2**24


class TokenSeq(tuple):
    """Tuple of lowercase tokens that also knows its word count."""

    __slots__ = ()

    @property
    def word_count(self) -> int:
        return sum(1 for t in self if is_word(t))

    def words(self) -> list[str]:
        return [t for t in self if is_word(t)]


def is_word(token: str) -> bool:
    return token.isalnum()


def tokenize(text: str) -> TokenSeq:
    """Lowercase ``text`` and split it into alphanumeric runs and punctuation.

    >>> list(tokenize("Hello, World!"))
    ['hello', ',', 'world', '!']
    """
    return TokenSeq(_TOKEN_RE.findall(text.lower()))


def as_tokens(text_or_tokens: str | Sequence[str]) -> TokenSeq:
    if isinstance(text_or_tokens, TokenSeq):
        return text_or_tokens
    if isinstance(text_or_tokens, str):
        return tokenize(text_or_tokens)
    return TokenSeq(text_or_tokens)


def word_count(text: str) -> int:
    return len(_WORD_RE.findall(text))


def truncate_words(text: str, n: int) -> str:
    """Cut ``text`` right after its ``n``-th word, keeping original casing."""
    if n <= 0:
        return ""
    for i, m in enumerate(_WORD_RE.finditer(text), start=1):
        if i == n:
            return text[: m.end()]
    return text


def truncate_tokens(text: str, n: int) -> str:
    """Like :func:`truncate_words` but counts punctuation tokens too."""
    if n <= 0:
        return ""
    for i, m in enumerate(_TOKEN_RE.finditer(text), start=1):
        if i == n:
            return text[: m.end()]
    return text


def split_sentences(text: str) -> list[str]:
    """Rule-based splitter.

    A boundary is a ``.``, ``?`` or ``!`` followed by whitespace and then an
    uppercase letter, a digit or an opening quote.  Lowercase continuations
    ("Mr. smith") never split.
    """
    out: list[str] = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        nxt = text[m.end(): m.end() + 1]
        if nxt and (nxt.isupper() or nxt.isdigit() or nxt in _OPEN_QUOTES):
            piece = text[start: m.start() + 1].strip()
            if piece:
                out.append(piece)
            start = m.end()
    tail = text[start:].strip()
    if tail:
        out.append(tail)
    return out


@dataclass(frozen=True)
class SparseVector:
    """Sparse weights keyed by dimension.

    Hashed vectors use integer keys below ``dim``; plain TF-IDF vectors key by
    token string and leave ``dim`` as ``None`` (open vocabulary).
    """

    entries: Mapping[Hashable, float] = field(default_factory=dict)
    dim: int | None = None

    def __post_init__(self):
        clean = {k: float(v) for k, v in self.entries.items() if v != 0.0}
        for k, v in clean.items():
            if not math.isfinite(v):
                raise ValueError(f"non-finite weight at {k!r}")
            if self.dim is not None and not (0 <= k < self.dim):
                raise ValueError(f"index {k} outside dim {self.dim}")
        object.__setattr__(self, "entries", clean)

    def __len__(self) -> int:
        return len(self.entries)

    def norm(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.entries.values()))

    def dot(self, other: "SparseVector") -> float:
        a, b = self.entries, other.entries
        if len(a) > len(b):
            a, b = b, a
        return math.fsum(v * b[k] for k, v in a.items() if k in b)


def vectorize_tfidf(tokens: Sequence[str], idf: Mapping[str, float] | None = None) -> SparseVector:
    """Term frequency times idf over alphanumeric tokens; unseen tokens get idf 1."""
    idf = idf or {}
    tf = Counter(t for t in tokens if is_word(t))
    return SparseVector({t: c * idf.get(t, 1.0) for t, c in tf.items()})


def smooth_idf(documents: Iterable[Sequence[str]]) -> dict[str, float]:
    """``ln(1 + N/df)`` over alphanumeric tokens; always positive."""
    df: Counter[str] = Counter()
    n = 0
    for doc in documents:
        n += 1
        df.update({t for t in doc if is_word(t)})
    return {t: math.log1p(n / c) for t, c in df.items()}


def fnv1a_64(s: str) -> int:
    h = FNV_OFFSET
    for byte in s.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def hashed_features(tokens: Sequence[str]) -> list[str]:
    """Unigram and adjacent-bigram feature strings, punctuation dropped first."""
    words = [t for t in tokens if is_word(t)]
    return words + [f"{a} {b}" for a, b in zip(words, words[1:])]


def vectorize_hashed_bigrams(
    tokens: Sequence[str],
    dim: int = HASH_DIM,
    idf: Mapping[str, float] | None = None,
) -> SparseVector:
    if dim <= 0 or dim & (dim - 1):
        raise ValueError(f"dim must be a power of two, got {dim}")
    idf = idf or {}
    acc: dict[int, float] = {}
    for feat, c in Counter(hashed_features(tokens)).items():
        idx = fnv1a_64(feat) % dim
        acc[idx] = acc.get(idx, 0.0) + c * idf.get(feat, 1.0)
    return SparseVector(acc, dim)


def cosine(u: SparseVector, v: SparseVector) -> float:
    if u.dim != v.dim:
        raise ValueError(f"dimension mismatch: {u.dim} vs {v.dim}")
    if not u.entries or not v.entries:
        return 0.0
    nu2 = math.fsum(w * w for w in u.entries.values())
    nv2 = math.fsum(w * w for w in v.entries.values())
    denom = math.sqrt(nu2 * nv2)
    if denom == 0.0:
        return 0.0
    return min(1.0, u.dot(v) / denom)
