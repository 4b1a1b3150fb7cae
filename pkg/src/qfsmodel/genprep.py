"""Inputs for an external abstractive generator.

Serialized form: ``[LEN_x] <query UMR> [SEP] sent_1 [SEP] sent_2 ...``.  Token
counts use the pipeline tokenizer, with ``[LEN_x]``, ``[SEP]`` and ``[MASK]``
each counting as one token.
"""
from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .rouge import rouge_n
from .text import as_tokens, tokenize, truncate_tokens
from .umr import umr_tokens

SEP = "[SEP]"
DEFAULT_MAX_TOKENS = 768
NUM_BINS = 10


@dataclass(frozen=True)
class LengthBin:
    lower: int
    upper: int
    median: float
    token: str

    def __contains__(self, length: int) -> bool:
        return self.lower <= length <= self.upper


@dataclass(frozen=True)
class LengthBinTable:
    bins: tuple[LengthBin, ...]

    def lookup(self, length: int) -> LengthBin:
        """Bin whose range holds ``length``, else the one with the nearest median
        (lower bin on a tie)."""
        for b in self.bins:
            if length in b:
                return b
        return min(self.bins, key=lambda b: abs(b.median - length))

    def to_json(self) -> list[dict[str, Any]]:
        return [{"lower": b.lower, "upper": b.upper, "median": b.median, "token": b.token} for b in self.bins]

    @classmethod
    def from_json(cls, rows: Iterable[dict[str, Any]]) -> "LengthBinTable":
        return cls(tuple(LengthBin(int(r["lower"]), int(r["upper"]), float(r["median"]), r["token"]) for r in rows))


def length_token(median: float) -> str:
    return f"[LEN_{int(math.floor(median / 10 + 0.5)) * 10}]"


def _cut_points(values: list[int], counts: list[int], n_bins: int) -> list[int]:
    """Indices into distinct ``values`` where each new bin starts (first is 0)."""
    m = len(values)
    total = sum(counts)
    cum = []
    run = 0
    for c in counts:
        run += c
        cum.append(run)
    cuts = [0]
    for k in range(1, n_bins):
        goal = k * total / n_bins
        lo = cuts[-1] + 1
        hi = m - (n_bins - k)
        # gap g sits between values[g-1] and values[g]; cum[g-1] items fall before it
        best = min(range(lo, hi + 1), key=lambda g: (abs(cum[g - 1] - goal), g))
        cuts.append(best)
    return cuts


def build_length_bins(training_lengths: Sequence[int], n_bins: int = NUM_BINS) -> LengthBinTable:
    """Equal-frequency bins over observed summary lengths.

    Equal values never straddle a bin edge.  Adjacent bins whose medians round
    to the same token are merged, so a table can end up with fewer bins.
    """
    lengths = sorted(int(x) for x in training_lengths)
    distinct = sorted(set(lengths))
    if len(distinct) < n_bins:
        raise ValueError(f"need at least {n_bins} distinct lengths, got {len(distinct)}")
    tally = Counter(lengths)
    counts = [tally[v] for v in distinct]
    cuts = _cut_points(distinct, counts, n_bins) + [len(distinct)]
    groups: list[list[int]] = []
    for a, b in zip(cuts, cuts[1:]):
        members = [x for v, c in zip(distinct[a:b], counts[a:b]) for x in [v] * c]
        groups.append(members)
    merged: list[list[int]] = []
    for g in groups:
        if merged and length_token(statistics.median(merged[-1])) == length_token(statistics.median(g)):
            merged[-1] = merged[-1] + g
        else:
            merged.append(g)
    return LengthBinTable(tuple(
        LengthBin(g[0], g[-1], float(statistics.median(g)), length_token(statistics.median(g))) for g in merged
    ))


def oracle_order(sentences: Sequence[str], reference, metric: str = "f1") -> list[str]:
    """Sentences by descending ROUGE-2 (``f1`` or ``recall``) against the
    reference; ties keep input order."""
    if metric not in ("f1", "recall"):
        raise ValueError(f"metric must be 'f1' or 'recall', got {metric!r}")
    ref = as_tokens(reference)
    if not ref:
        raise ValueError("reference summary is empty")
    scores = [getattr(rouge_n(2, ref, tokenize(s)), metric) for s in sentences]
    order = sorted(range(len(sentences)), key=lambda i: (-scores[i], i))
    return [sentences[i] for i in order]


@dataclass(frozen=True)
class GeneratorInput:
    id: str
    text: str
    length_token: str
    requested_length: int
    token_count: int

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "length_token": self.length_token,
            "requested_length": self.requested_length,
        }


def prepare_generator_input(
    evidence: Sequence[str],
    query_umr: str | None,
    requested_length: int,
    bins: LengthBinTable,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    record_id: str = "",
) -> GeneratorInput:
    """Serialize length token, optional query and evidence under a token cap.

    Evidence is dropped whole from the end; only a lone first sentence that
    cannot fit is cut mid-sentence.
    """
    if not evidence:
        raise ValueError("evidence is empty")
    if max_tokens < 3:
        raise ValueError("max_tokens must be >= 3")
    tok = bins.lookup(requested_length).token
    q_toks = umr_tokens(query_umr) if query_umr else []
    # leave room for at least one separator and one evidence token
    q_toks = q_toks[: max_tokens - 3]
    parts = [tok, *([" ".join(q_toks)] if q_toks else [])]
    used = 1 + len(q_toks)
    kept = 0
    for k, sent in enumerate(evidence):
        n = len(tokenize(sent))
        need = n + (1 if (k > 0 or q_toks) else 0)
        if used + need <= max_tokens:
            if k > 0 or q_toks:
                parts.append(SEP)
            parts.append(sent)
            used += need
            kept += 1
            continue
        if kept == 0:
            sep = 1 if q_toks else 0
            room = max_tokens - used - sep
            if sep:
                parts.append(SEP)
            parts.append(truncate_tokens(sent, room))
            used += sep + room
        break
    return GeneratorInput(record_id, " ".join(parts), tok, int(requested_length), used)


def count_tokens(text: str) -> int:
    """Token count of a serialized generator input under the rules above."""
    n = 0
    for piece in text.split():
        if piece == SEP or (piece.startswith("[LEN_") and piece.endswith("]")):
            n += 1
        else:
            n += len(umr_tokens(piece))
    return n


def has_repeated_trigram(tokens: Sequence[str]) -> bool:
    seen = set()
    for tri in zip(tokens, tokens[1:], tokens[2:]):
        if tri in seen:
            return True
        seen.add(tri)
    return False
