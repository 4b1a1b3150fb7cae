"""ROUGE-1/2/SU4 and the label-smoothed regression target.

Counting units are built from alphanumeric tokens only; overlaps are clipped
multiset intersections.  Multi-reference scores are plain means over
references (no jackknifing).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .text import as_tokens, is_word

DEFAULT_LAMBDA = 0.15
SKIP_DISTANCE = 4
VARIANTS = ("R1", "R2", "SU4")


@dataclass(frozen=True)
class RougeScore:
    recall: float
    precision: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: int, n_ref: int, n_cand: int) -> "RougeScore":
        r = overlap / n_ref if n_ref else 0.0
        p = overlap / n_cand if n_cand else 0.0
        f = 2 * r * p / (r + p) if r + p > 0 else 0.0
        return cls(r, p, f)

    def as_dict(self) -> dict[str, float]:
        return {"recall": self.recall, "precision": self.precision, "f1": self.f1}


@dataclass(frozen=True)
class TargetConfig:
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")


@lru_cache(maxsize=1)
def _stemmer():
    try:
        from nltk.stem.porter import PorterStemmer
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise RuntimeError("stemming needs nltk: pip install 'qfsmodel[stem]'") from exc
    return PorterStemmer()


def _words(tokens: Sequence[str] | str, stem: bool) -> list[str]:
    words = [t for t in as_tokens(tokens) if is_word(t)]
    if stem:
        st = _stemmer()
        words = [st.stem(w) for w in words]
    return words


def ngrams(words: Sequence[str], n: int) -> Counter:
    return Counter(tuple(words[i: i + n]) for i in range(len(words) - n + 1))


def su4_units(words: Sequence[str]) -> Counter:
    """Unigrams plus skip-bigrams with at most four tokens in between."""
    units = Counter((w,) for w in words)
    for i in range(len(words)):
        for j in range(i + 1, min(i + SKIP_DISTANCE + 2, len(words))):
            units[(words[i], words[j])] += 1
    return units


def _score(ref: Counter, cand: Counter) -> RougeScore:
    overlap = sum((ref & cand).values())
    return RougeScore.from_counts(overlap, sum(ref.values()), sum(cand.values()))


def rouge_n(n: int, reference, candidate, stem: bool = False) -> RougeScore:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return _score(ngrams(_words(reference, stem), n), ngrams(_words(candidate, stem), n))


def rouge_su4(reference, candidate, stem: bool = False) -> RougeScore:
    return _score(su4_units(_words(reference, stem)), su4_units(_words(candidate, stem)))


def rouge(variant: str, reference, candidate, stem: bool = False) -> RougeScore:
    if variant == "R1":
        return rouge_n(1, reference, candidate, stem)
    if variant == "R2":
        return rouge_n(2, reference, candidate, stem)
    if variant == "SU4":
        return rouge_su4(reference, candidate, stem)
    raise ValueError(f"unknown ROUGE variant {variant!r}; expected one of {VARIANTS}")


def regression_target(summary, sentence, cfg: TargetConfig = TargetConfig(), stem: bool = False) -> float:
    """ROUGE-2 F1 plus ``lam`` times ROUGE-1 F1 of ``sentence`` against ``summary``."""
    r2 = rouge_n(2, summary, sentence, stem).f1
    r1 = rouge_n(1, summary, sentence, stem).f1
    return r2 + cfg.lam * r1


def multi_ref_f1(references: Sequence, candidate, variant: str = "R2", stem: bool = False) -> RougeScore:
    if not references:
        raise ValueError("at least one reference is required")
    scores = [rouge(variant, ref, candidate, stem) for ref in references]
    k = len(scores)
    return RougeScore(
        sum(s.recall for s in scores) / k,
        sum(s.precision for s in scores) / k,
        sum(s.f1 for s in scores) / k,
    )
