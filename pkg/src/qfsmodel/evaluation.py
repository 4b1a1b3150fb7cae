"""Evidence evaluation: R@k retrieval recall, budgeted extracts, and non-learned baselines."""
from __future__ import annotations

import csv
import io
import random
from collections import Counter
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from .ranker import RankedItem, rank_by_scores
from .rouge import VARIANTS, RougeScore, multi_ref_f1, rouge_n
from .text import as_tokens, cosine, is_word, tokenize, truncate_words, vectorize_tfidf
from .umr import function_words


@dataclass(frozen=True)
class ExtractBudget:
    word_budget: int = 250
    redundancy_threshold: float = 0.6

    def __post_init__(self):
        if self.word_budget < 1:
            raise ValueError("word_budget must be >= 1")
        if not 0.0 < self.redundancy_threshold <= 1.0:
            raise ValueError("redundancy_threshold must lie in (0, 1]")


def _text(item) -> str:
    return item.sentence if isinstance(item, RankedItem) else item


def recall_at_k(ranked: Sequence, references: Sequence, k: int) -> float:
    """Mean ROUGE-2 recall of the concatenated top-k sentences over references."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not references:
        raise ValueError("at least one reference is required")
    top = [t for item in ranked[:k] for t in tokenize(_text(item))]
    return sum(rouge_n(2, as_tokens(ref), top).recall for ref in references) / len(references)


def select_extract(ranked: Sequence, budget: ExtractBudget = ExtractBudget(),
                   idf: Mapping[str, float] | None = None) -> list[tuple[int, str]]:
    """(rank position, emitted text) of each extract sentence.

    A sentence is skipped when its TF-IDF cosine with any kept sentence reaches
    the redundancy threshold.  The first non-redundant sentence that overflows
    the word budget is cut at the budget and ends the extract.
    """
    kept: list[tuple[int, str]] = []
    vecs = []
    used = 0
    for pos, item in enumerate(ranked):
        sent = _text(item)
        toks = tokenize(sent)
        wc = toks.word_count
        if wc == 0:
            continue
        vec = vectorize_tfidf(toks, idf)
        if any(cosine(vec, v) >= budget.redundancy_threshold for v in vecs):
            continue
        if used + wc > budget.word_budget:
            remaining = budget.word_budget - used
            if remaining > 0:
                kept.append((pos, truncate_words(sent, remaining)))
            break
        kept.append((pos, sent))
        vecs.append(vec)
        used += wc
    return kept


def assemble_extract(ranked: Sequence, budget: ExtractBudget = ExtractBudget(),
                     idf: Mapping[str, float] | None = None) -> list[str]:
    return [text for _, text in select_extract(ranked, budget, idf)]


def evaluate_extract(extract: Sequence[str], references: Sequence) -> dict[str, RougeScore]:
    candidate = tokenize(" ".join(extract))
    refs = [as_tokens(r) for r in references]
    return {v: multi_ref_f1(refs, candidate, v) for v in VARIANTS}


def _flatten(documents: Sequence) -> list[list[str]]:
    return [list(getattr(d, "sentences", d)) for d in documents]


def baseline_rank(method: str, query: str, documents: Sequence) -> list[RankedItem]:
    """Non-learned rankings over the cluster's sentences in flattened order.

    ``termfreq`` scores a sentence by summing, over the distinct query content
    words it contains, each word's frequency in the whole cluster.  This is a
    local definition, not a canonical one.  ``lead`` puts the last (most
    recent) document first and keeps everything else in input order.
    """
    docs = _flatten(documents)
    sentences = [s for d in docs for s in d]
    if method == "termfreq":
        toks = [[t for t in tokenize(s) if is_word(t)] for s in sentences]
        tf = Counter(t for ts in toks for t in ts)
        stop = function_words()
        qwords = {t for t in tokenize(query) if is_word(t) and t not in stop}
        scores = [float(sum(tf[w] for w in qwords & set(ts))) for ts in toks]
        return rank_by_scores(sentences, scores)
    if method == "lead":
        if not docs:
            return []
        start = len(sentences) - len(docs[-1])
        order = list(range(start, len(sentences))) + list(range(start))
        n = len(order)
        return [RankedItem(i, sentences[i], float(n - r)) for r, i in enumerate(order)]
    raise ValueError(f"unknown baseline method {method!r}")


def random_rank(sentences: Sequence[str], seed: int) -> list[RankedItem]:
    order = list(range(len(sentences)))
    random.Random(seed).shuffle(order)
    n = len(order)
    return [RankedItem(i, sentences[i], float(n - r)) for r, i in enumerate(order)]


def macro_report(per_query: Mapping[str, Mapping[str, Any]]) -> dict[str, Any]:
    """Per-query scores plus macro averages of every numeric metric."""
    totals: dict[str, list[float]] = {}
    for scores in per_query.values():
        for name, val in scores.items():
            if isinstance(val, RougeScore):
                val = val.f1
            if isinstance(val, (int, float)):
                totals.setdefault(name, []).append(float(val))
    macro = {name: sum(vals) / len(vals) for name, vals in sorted(totals.items())}
    queries = {
        qid: {k: (v.as_dict() if isinstance(v, RougeScore) else v) for k, v in scores.items()}
        for qid, scores in per_query.items()
    }
    return {"queries": queries, "macro": macro, "count": len(per_query)}


def report_csv(rows: Iterable[tuple[str, Mapping[str, float]]], columns: Sequence[str]) -> str:
    """System-by-metric table (scores x100, one decimal) like the usual results tables."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["system", *columns])
    for name, metrics in rows:
        w.writerow([name, *(f"{100 * metrics[c]:.1f}" if c in metrics else "" for c in columns)])
    return buf.getvalue()
