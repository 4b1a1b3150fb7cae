"""Distant supervision: generic summarization records to (proxy query, sentence, target) pairs."""
from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Iterable, Sequence

from .rouge import TargetConfig, regression_target
from .text import tokenize
from .umr import MaskPolicy, SlotSpan, extract_slots, imported_slots, mask_summary, render_umr

log = logging.getLogger(__name__)


@dataclass
class Document:
    doc_id: str
    sentences: list[str]


@dataclass
class CorpusRecord:
    cluster_id: str
    documents: list[Document]
    summary: list[str]
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.documents:
            raise ValueError(f"record {self.cluster_id!r} has no documents")
        if not any(s.strip() for s in self.summary):
            raise ValueError(f"record {self.cluster_id!r} has an empty summary")

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "CorpusRecord":
        try:
            docs = [Document(str(d["doc_id"]), list(d["sentences"])) for d in obj["documents"]]
            known = {"cluster_id", "documents", "summary"}
            return cls(str(obj["cluster_id"]), docs, list(obj["summary"]),
                       {k: v for k, v in obj.items() if k not in known})
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed corpus record: {exc!r}") from exc

    def to_json(self) -> dict[str, Any]:
        out = dict(self.extra)
        out.update(
            cluster_id=self.cluster_id,
            documents=[{"doc_id": d.doc_id, "sentences": d.sentences} for d in self.documents],
            summary=self.summary,
        )
        return out

    def sentences(self) -> list[str]:
        return [s for d in self.documents for s in d.sentences]


@dataclass(frozen=True)
class SamplingPolicy:
    granularity: str = "cluster"
    head: int = 20
    tail: int = 20

    def __post_init__(self):
        if self.granularity not in ("cluster", "document"):
            raise ValueError(f"granularity must be 'cluster' or 'document', got {self.granularity!r}")
        if self.head < 0 or self.tail < 0 or self.head + self.tail < 1:
            raise ValueError("head and tail must be >= 0 with head + tail >= 1")


MULTINEWS_POLICY = SamplingPolicy("cluster", 20, 20)
CNNDM_POLICY = SamplingPolicy("document", 3, 3)


@dataclass
class TrainingPair:
    pair_id: str
    query_umr: str
    sentence: str
    target: float
    cluster_id: str = ""
    split: str = "train"

    def to_json(self) -> dict[str, Any]:
        return {
            "pair_id": self.pair_id,
            "cluster_id": self.cluster_id,
            "split": self.split,
            "query_umr": self.query_umr,
            "sentence": self.sentence,
            "target": self.target,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "TrainingPair":
        return cls(
            str(obj["pair_id"]), obj["query_umr"], obj["sentence"], float(obj["target"]),
            str(obj.get("cluster_id", "")), obj.get("split", "train"),
        )


def _head_tail(n: int, head: int, tail: int) -> list[int]:
    picked = list(range(min(head, n))) + list(range(max(n - tail, 0), n))
    return sorted(set(picked))


def sample_positions(record: CorpusRecord, policy: SamplingPolicy) -> list[tuple[int, int]]:
    """(document index, sentence index) of sampled candidates, in corpus order."""
    if policy.granularity == "document":
        return [(d, s) for d, doc in enumerate(record.documents)
                for s in _head_tail(len(doc.sentences), policy.head, policy.tail)]
    flat = [(d, s) for d, doc in enumerate(record.documents) for s in range(len(doc.sentences))]
    return [flat[i] for i in _head_tail(len(flat), policy.head, policy.tail)]


def sample_candidates(record: CorpusRecord, policy: SamplingPolicy) -> list[str]:
    return [record.documents[d].sentences[s] for d, s in sample_positions(record, policy)]


def record_seed(global_seed: int, cluster_id: str) -> int:
    digest = hashlib.blake2b(f"{global_seed}\x00{cluster_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def split_for(cluster_id: str, dev_fraction: float = 0.1) -> str:
    """Stable train/dev assignment by cluster so a summary never spans splits."""
    digest = hashlib.blake2b(cluster_id.encode(), digest_size=8).digest()
    bucket = int.from_bytes(digest, "little") % 10_000
    return "dev" if bucket < dev_fraction * 10_000 else "train"


def build_pairs(
    record: CorpusRecord,
    policy: SamplingPolicy,
    mask_policy: MaskPolicy,
    cfg: TargetConfig = TargetConfig(),
    stoplist: frozenset[str] | None = None,
    dev_fraction: float = 0.1,
    propositions: dict[tuple[str, int], list[SlotSpan]] | None = None,
) -> list[TrainingPair]:
    """Pairs for one record.  ``propositions`` holds imported summary slot
    spans keyed by (cluster_id, summary sentence index)."""
    summary_toks = [tokenize(s) for s in record.summary]
    if propositions:
        slots = imported_slots(propositions, record.cluster_id, summary_toks, stoplist)
    else:
        slots = [extract_slots(t, stoplist, i) for i, t in enumerate(summary_toks)]
    if not any(slots):
        log.warning("summary of %s has no information slots; proxy query is the plain summary",
                    record.cluster_id)
    query = render_umr(mask_summary(summary_toks, slots, mask_policy))
    flat_summary = tokenize(" ".join(record.summary))
    split = split_for(record.cluster_id, dev_fraction)
    pairs = []
    for d, s in sample_positions(record, policy):
        doc = record.documents[d]
        sent = doc.sentences[s]
        pairs.append(TrainingPair(
            pair_id=f"{record.cluster_id}:{doc.doc_id}:{s}",
            query_umr=query,
            sentence=sent,
            target=regression_target(flat_summary, tokenize(sent), cfg),
            cluster_id=record.cluster_id,
            split=split,
        ))
    return pairs


def _pairs_for(record, policy, gamma, seed, cfg, stoplist, dev_fraction, propositions=None):
    mask_policy = MaskPolicy(gamma, record_seed(seed, record.cluster_id))
    return build_pairs(record, policy, mask_policy, cfg, stoplist, dev_fraction, propositions)


def build_corpus_pairs(
    records: Iterable[CorpusRecord],
    policy: SamplingPolicy,
    gamma: float,
    seed: int,
    cfg: TargetConfig = TargetConfig(),
    stoplist: frozenset[str] | None = None,
    dev_fraction: float = 0.1,
    workers: int = 1,
    propositions: dict[tuple[str, int], list[SlotSpan]] | None = None,
) -> list[TrainingPair]:
    """Pairs for a whole corpus; each record gets its own seed derived from ``seed``."""
    fn = partial(_pairs_for, policy=policy, gamma=gamma, seed=seed, cfg=cfg,
                 stoplist=stoplist, dev_fraction=dev_fraction, propositions=propositions)
    records = list(records)
    if workers > 1 and len(records) > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(fn, records, chunksize=16))
    else:
        chunks = [fn(r) for r in records]
    return [p for chunk in chunks for p in chunk]


def load_corpus(rows: Iterable[dict[str, Any]]) -> list[CorpusRecord]:
    return [CorpusRecord.from_json(r) for r in rows]


def summary_tokens(record: CorpusRecord) -> Sequence[str]:
    return tokenize(" ".join(record.summary))
