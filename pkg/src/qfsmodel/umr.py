"""Unified masked representation of summaries (proxy queries) and real queries.

A :class:`MaskedText` is a list of sentences, each an ordered list of segments.
A segment is either a tuple of revealed tokens or the :data:`MASK` sentinel.
"""
from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, Union

from .text import TokenSeq, as_tokens, is_word, split_sentences, tokenize

log = logging.getLogger(__name__)

MASK_TOKEN = "[MASK]"
_UMR_SPLIT_RE = re.compile(re.escape(MASK_TOKEN))


class _Mask:
    __slots__ = ()

    def __repr__(self) -> str:
        return "MASK"


MASK = _Mask()
Segment = Union[tuple, _Mask]


@dataclass(frozen=True)
class SlotSpan:
    sentence_index: int
    token_start: int
    token_end: int
    source: str = "heuristic"

    def __len__(self) -> int:
        return self.token_end - self.token_start


@dataclass(frozen=True)
class MaskPolicy:
    gamma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass
class MaskedText:
    sentences: list[list[Segment]]
    provenance: str = "summary_proxy"
    budget: int = 0
    revealed: int = 0

    def render(self) -> str:
        return render_umr(self)

    def mask_count(self) -> int:
        return sum(1 for sent in self.sentences for seg in sent if seg is MASK)

    def revealed_tokens(self) -> list[str]:
        return [t for sent in self.sentences for seg in sent if seg is not MASK for t in seg]


def read_lexicon_lines(lines: Iterable[str]) -> list[str]:
    out = []
    for line in lines:
        line = line.split("#", 1)[0].strip().lower()
        if line:
            out.append(line)
    return out


def _bundled(name: str) -> list[str]:
    text = resources.files("qfsmodel.data").joinpath(name).read_text(encoding="utf-8")
    return read_lexicon_lines(text.splitlines())


@lru_cache(maxsize=None)
def function_words() -> frozenset[str]:
    return frozenset(_bundled("function_words.txt"))


@lru_cache(maxsize=None)
def verb_words() -> frozenset[str]:
    return frozenset(_bundled("verbs.txt"))


def default_slot_stoplist(include_verbs: bool = False) -> frozenset[str]:
    """Words that break slot runs.

    With ``include_verbs`` the bundled verbs become slot material, which is
    the "-Verb" ablation setting.
    """
    return function_words() if include_verbs else function_words() | verb_words()


class QueryLexicon:
    """Interrogative/request patterns matched longest-first over tokens."""

    def __init__(self, patterns: Iterable[str]):
        pats = [TokenSeq(tokenize(p)) for p in patterns]
        pats = [p for p in pats if p]
        if not pats:
            raise ValueError("query lexicon is empty")
        self.patterns = sorted(set(pats), key=lambda p: (-len(p), p))
        self._by_len: dict[int, set[tuple]] = {}
        for p in self.patterns:
            self._by_len.setdefault(len(p), set()).add(tuple(p))
        self._lengths = sorted(self._by_len, reverse=True)

    @classmethod
    def from_file(cls, path: str | Path) -> "QueryLexicon":
        return cls(read_lexicon_lines(Path(path).read_text(encoding="utf-8").splitlines()))

    @classmethod
    def default(cls) -> "QueryLexicon":
        return cls(_bundled("query_lexicon.txt"))

    def match_at(self, tokens: Sequence[str], pos: int) -> int:
        """Length of the longest pattern starting at ``pos`` (0 if none)."""
        for n in self._lengths:
            if pos + n <= len(tokens) and tuple(tokens[pos: pos + n]) in self._by_len[n]:
                return n
        return 0


def extract_slots(sentence, stoplist: frozenset[str] | None = None, sentence_index: int = 0) -> list[SlotSpan]:
    """Maximal runs of alphanumeric tokens outside ``stoplist``."""
    tokens = as_tokens(sentence)
    stop = default_slot_stoplist() if stoplist is None else stoplist
    spans = []
    start = None
    for i, tok in enumerate(tokens):
        content = is_word(tok) and tok not in stop
        if content and start is None:
            start = i
        elif not content and start is not None:
            spans.append(SlotSpan(sentence_index, start, i))
            start = None
    if start is not None:
        spans.append(SlotSpan(sentence_index, start, len(tokens)))
    return spans


def validate_spans(spans: Sequence[SlotSpan], length: int) -> str | None:
    """Return a diagnostic if ``spans`` break the slot invariants, else ``None``."""
    prev_end = 0
    for sp in sorted(spans, key=lambda s: (s.token_start, s.token_end)):
        if not 0 <= sp.token_start < sp.token_end <= length:
            return f"span [{sp.token_start}, {sp.token_end}) outside sentence of {length} tokens"
        if sp.token_start < prev_end:
            return f"span [{sp.token_start}, {sp.token_end}) overlaps a previous span"
        prev_end = sp.token_end
    return None


def load_propositions(path: str | Path) -> dict[tuple[str, int], list[SlotSpan]]:
    """Read externally produced slot spans.

    Each JSONL record is ``{doc_id, sentence_index, spans: [[start, end], ...]}``.
    Range checks need the sentence, so they happen in :func:`imported_slots`.
    """
    out: dict[tuple[str, int], list[SlotSpan]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            idx = int(rec["sentence_index"])
            out[(str(rec["doc_id"]), idx)] = [
                SlotSpan(idx, int(s), int(e), "imported") for s, e in rec["spans"]
            ]
    return out


def imported_slots(
    props: dict[tuple[str, int], list[SlotSpan]],
    doc_id: str,
    sentences: Sequence[Sequence[str]],
    stoplist: frozenset[str] | None = None,
) -> list[list[SlotSpan]]:
    """Per-sentence slots for ``doc_id``, falling back to the heuristic
    extractor where no valid imported record exists."""
    out = []
    for i, sent in enumerate(sentences):
        spans = props.get((doc_id, i))
        if spans is not None:
            problem = validate_spans(spans, len(sent))
            if problem is None:
                out.append(sorted(spans, key=lambda s: s.token_start))
                continue
            log.warning("rejected imported spans for %s sentence %d: %s", doc_id, i, problem)
        out.append(extract_slots(sent, stoplist, i))
    return out


def _segments(tokens: Sequence[str], masked: Iterable[SlotSpan]) -> list[Segment]:
    hidden = [False] * len(tokens)
    for sp in masked:
        for i in range(sp.token_start, sp.token_end):
            hidden[i] = True
    segs: list[Segment] = []
    run: list[str] = []
    for tok, h in zip(tokens, hidden):
        if h:
            if run:
                segs.append(tuple(run))
                run = []
            if not segs or segs[-1] is not MASK:
                segs.append(MASK)
        else:
            run.append(tok)
    if run:
        segs.append(tuple(run))
    return segs


def mask_summary(
    sentences: Sequence[Sequence[str]],
    slots: Sequence[Sequence[SlotSpan]],
    policy: MaskPolicy = MaskPolicy(),
) -> MaskedText:
    """Mask every slot, then reveal slots round-robin until the token budget is met.

    The budget is ``floor(gamma * total slot tokens)`` and is checked before
    each reveal, so ``gamma=0`` reveals nothing and ``gamma=1`` reveals all.
    """
    sentences = [as_tokens(s) for s in sentences]
    if len(slots) != len(sentences):
        raise ValueError("need one slot list per sentence")
    for sent, spans in zip(sentences, slots):
        problem = validate_spans(spans, len(sent))
        if problem:
            raise ValueError(problem)

    masked = [sorted(spans, key=lambda s: s.token_start) for spans in slots]
    total = sum(len(sp) for spans in masked for sp in spans)
    budget = math.floor(policy.gamma * total)
    rng = random.Random(policy.seed)
    b = 0
    done = False
    while not done:
        available = [i for i, spans in enumerate(masked) if spans]
        if not available:
            break
        for i in available:
            if b >= budget:
                done = True
                break
            slot = masked[i].pop(rng.randrange(len(masked[i])))
            b += len(slot)

    return MaskedText(
        [_segments(sent, spans) for sent, spans in zip(sentences, masked)],
        provenance="summary_proxy",
        budget=budget,
        revealed=b,
    )


def _mask_phrases(tokens: Sequence[str], lexicon: QueryLexicon) -> list[Segment]:
    segs: list[Segment] = []
    run: list[str] = []
    i = 0
    while i < len(tokens):
        n = lexicon.match_at(tokens, i)
        if n:
            if run:
                segs.append(tuple(run))
                run = []
            if not segs or segs[-1] is not MASK:
                segs.append(MASK)
            i += n
        else:
            run.append(tokens[i])
            i += 1
    if run:
        segs.append(tuple(run))
    return segs


def mask_query(title, narrative, lexicon: QueryLexicon | None = None) -> MaskedText:
    """Mask interrogative/request phrases; prefix ``[MASK] title .`` if a title is given.

    ``narrative`` may be raw text (split into sentences first) or a single
    tokenized sentence.
    """
    lexicon = lexicon or QueryLexicon.default()
    if isinstance(narrative, str):
        narr_sents = [tokenize(s) for s in split_sentences(narrative)]
    else:
        narr_sents = [as_tokens(narrative)]
    narr_sents = [s for s in narr_sents if s]
    if not narr_sents:
        raise ValueError("query narrative is empty")
    sentences = []
    if title:
        title_toks = as_tokens(title)
        if title_toks:
            sentences.append([MASK, tuple(title_toks) + (".",)])
    sentences.extend(_mask_phrases(s, lexicon) for s in narr_sents)
    return MaskedText(sentences, provenance="query")


def render_umr(m: MaskedText) -> str:
    """Flat string form.  A mask ending one sentence and a mask opening the next
    collapse into one, so the rendering never holds two masks in a row."""
    parts: list[str] = []
    for sent in m.sentences:
        for seg in sent:
            if seg is MASK:
                if not parts or parts[-1] != MASK_TOKEN:
                    parts.append(MASK_TOKEN)
            elif seg:
                parts.append(" ".join(seg))
    return " ".join(parts)


def umr_tokens(text: str) -> list[str]:
    """Tokenize a rendered UMR, keeping each ``[MASK]`` as a single token."""
    out: list[str] = []
    pieces = _UMR_SPLIT_RE.split(text)
    for k, piece in enumerate(pieces):
        if k:
            out.append(MASK_TOKEN)
        out.extend(tokenize(piece))
    return out


def proxy_query(
    summary_sentences: Sequence[str],
    policy: MaskPolicy,
    stoplist: frozenset[str] | None = None,
    slots: Sequence[Sequence[SlotSpan]] | None = None,
) -> MaskedText:
    """Summary sentences (raw text) to a masked proxy query."""
    toks = [tokenize(s) for s in summary_sentences]
    if slots is None:
        slots = [extract_slots(t, stoplist, i) for i, t in enumerate(toks)]
    return mask_summary(toks, slots, policy)
