"""Pointwise evidence regressor over hashed (query UMR, sentence) features.

The model is linear: ``score = w . featurize(query, sentence) + bias``, trained
by mini-batch SGD on mean squared error against the smoothed ROUGE targets.
External scorers can replace it through the JSONL score exchange.
"""
from __future__ import annotations

import json
import logging
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .jsonio import atomic_open, read_jsonl, write_jsonl
from .text import SparseVector, fnv1a_64, is_word, tokenize
from .umr import MASK_TOKEN, umr_tokens

log = logging.getLogger(__name__)

FEATURE_DIM = 2**20
# dense slots below RESERVED; hashed features land in [RESERVED, dim)
UNIGRAM_OVERLAP = 0
BIGRAM_OVERLAP = 1
MASK_COUNT = 2
RESERVED = 8

PARAMS_MAGIC = b"MRGE"
PARAMS_VERSION = 1
_HEADER = struct.Struct("<4sII")

_LENGTH_BUCKETS = (0, 5, 10, 20, 40)
# keeps the mask-count feature near unit scale so SGD at the default rate stays stable
_MASK_SCALE = math.log1p(64)


def _bucket(n: int) -> int:
    return sum(1 for edge in _LENGTH_BUCKETS if n > edge)


def _bigrams(tokens: Sequence[str]) -> list[tuple[str, str]]:
    return list(zip(tokens, tokens[1:]))


def _hash_index(feature: str, dim: int) -> int:
    return RESERVED + fnv1a_64(feature) % (dim - RESERVED)


def feature_map(query_umr: str, sentence: str) -> tuple[dict[str, float], dict[int, float]]:
    """Named hashed features and dense-slot values before hashing."""
    q = [t for t in umr_tokens(query_umr) if t == MASK_TOKEN or is_word(t)]
    s = [t for t in tokenize(sentence) if is_word(t)]
    named: Counter[str] = Counter()

    q_feats = [f"q:{t}" for t in q] + [f"q:{a} {b}" for a, b in _bigrams(q)]
    s_feats = [f"s:{t}" for t in s] + [f"s:{a} {b}" for a, b in _bigrams(s)]
    for feats in (q_feats, s_feats):
        if feats:
            w = 1.0 / math.sqrt(len(feats))
            for f in feats:
                named[f] += w

    q_set = set(q)
    shared = [t for t in s if t in q_set]
    if shared:
        w = 1.0 / math.sqrt(len(s))
        for t in sorted(set(shared)):
            named[f"x:{t}"] += w
    named[f"len:{_bucket(len(s))}"] += 1.0

    q_bi = set(_bigrams(q))
    s_bi = _bigrams(s)
    dense = {
        UNIGRAM_OVERLAP: len(shared) / len(s) if s else 0.0,
        BIGRAM_OVERLAP: sum(1 for b in s_bi if b in q_bi) / len(s_bi) if s_bi else 0.0,
        MASK_COUNT: math.log1p(sum(1 for t in q if t == MASK_TOKEN)) / _MASK_SCALE,
    }
    return dict(named), dense


def featurize(query_umr: str, sentence: str, dim: int = FEATURE_DIM) -> SparseVector:
    named, dense = feature_map(query_umr, sentence)
    acc: dict[int, float] = {}
    for f, v in named.items():
        i = _hash_index(f, dim)
        acc[i] = acc.get(i, 0.0) + v
    acc.update(dense)
    return SparseVector(acc, dim)


def feature_matrix(queries: Sequence[str], sentences: Sequence[str], dim: int = FEATURE_DIM) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for q, s in zip(queries, sentences):
        vec = featurize(q, s, dim).entries
        for i in sorted(vec):
            indices.append(i)
            data.append(vec[i])
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(indptr) - 1, dim),
    )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    batch_size: int = 128
    epochs: int = 3
    seed: int = 0
    dim: int = FEATURE_DIM

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.dim <= RESERVED:
            raise ValueError(f"dim must exceed {RESERVED}")


@dataclass
class RegressorParams:
    weights: np.ndarray
    bias: float = 0.0
    metadata: dict[str, Any] = field(default_factory=dict)
    history: list[float] = field(default_factory=list)

    @classmethod
    def zeros(cls, dim: int = FEATURE_DIM) -> "RegressorParams":
        return cls(np.zeros(dim, dtype=np.float64))

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    def check_finite(self) -> None:
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise FloatingPointError("regressor parameters are not finite")

    def save(self, path: str | Path) -> None:
        trailer = {"bias": self.bias, "history": self.history, "metadata": self.metadata}
        with atomic_open(path, "wb") as fh:
            fh.write(_HEADER.pack(PARAMS_MAGIC, PARAMS_VERSION, self.dim))
            fh.write(self.weights.astype("<f8").tobytes())
            fh.write(json.dumps(trailer, sort_keys=True).encode("utf-8"))

    @classmethod
    def load(cls, path: str | Path) -> "RegressorParams":
        raw = Path(path).read_bytes()
        if len(raw) < _HEADER.size:
            raise ValueError(f"{path}: truncated parameter file")
        magic, version, dim = _HEADER.unpack_from(raw)
        if magic != PARAMS_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != PARAMS_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        end = _HEADER.size + 8 * dim
        if len(raw) < end:
            raise ValueError(f"{path}: weight array truncated")
        weights = np.frombuffer(raw, dtype="<f8", count=dim, offset=_HEADER.size).astype(np.float64)
        trailer = json.loads(raw[end:].decode("utf-8") or "{}")
        return cls(weights, float(trailer.get("bias", 0.0)), trailer.get("metadata", {}),
                   list(trailer.get("history", [])))


def predict_matrix(params: RegressorParams, X: sp.csr_matrix) -> np.ndarray:
    return X @ params.weights + params.bias


def mse_loss(params: RegressorParams, X: sp.csr_matrix, y: np.ndarray) -> float:
    r = predict_matrix(params, X) - y
    return float(np.mean(r * r))


def mse_gradient(params: RegressorParams, X: sp.csr_matrix, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Gradient of the batch-mean squared error w.r.t. (weights, bias)."""
    r = predict_matrix(params, X) - y
    scale = 2.0 / X.shape[0]
    return scale * (X.T @ r), scale * float(r.sum())


def _collect(pairs: Iterable) -> tuple[list[str], list[str], np.ndarray]:
    queries, sentences, targets = [], [], []
    for p in pairs:
        if not math.isfinite(p.target):
            log.warning("skipping pair %s: non-finite target %r", p.pair_id, p.target)
            continue
        queries.append(p.query_umr)
        sentences.append(p.sentence)
        targets.append(p.target)
    return queries, sentences, np.asarray(targets, dtype=np.float64)


def train(pairs: Iterable, cfg: TrainConfig = TrainConfig(), metadata: dict[str, Any] | None = None) -> RegressorParams:
    queries, sentences, y = _collect(pairs)
    if len(y) == 0:
        raise ValueError("no usable training pairs")
    X = feature_matrix(queries, sentences, cfg.dim)
    params = RegressorParams.zeros(cfg.dim)
    rng = np.random.default_rng(cfg.seed)
    n = len(y)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        sq_err = 0.0
        # divergence is reported below as FloatingPointError, not as numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, cfg.batch_size):
                idx = order[start: start + cfg.batch_size]
                Xb, yb = X[idx], y[idx]
                r = predict_matrix(params, Xb) - yb
                sq_err += float(r @ r)
                scale = 2.0 / len(idx)
                params.weights -= cfg.learning_rate * scale * (Xb.T @ r)
                params.bias -= cfg.learning_rate * scale * float(r.sum())
        params.history.append(sq_err / n)
        log.debug("epoch %d mean mse %.6f", epoch + 1, sq_err / n)
        params.check_finite()
    params.metadata = {
        "seed": cfg.seed, "epochs": cfg.epochs, "lr": cfg.learning_rate,
        "batch_size": cfg.batch_size, "pairs": n, **(metadata or {}),
    }
    return params


def predict(params: RegressorParams, query_umr: str, sentence: str) -> float:
    X = feature_matrix([query_umr], [sentence], params.dim)
    return float(predict_matrix(params, X)[0])


class RankedItem(NamedTuple):
    index: int
    sentence: str
    score: float


def rank_by_scores(sentences: Sequence[str], scores: Sequence[float]) -> list[RankedItem]:
    """Descending score, ties by ascending original index."""
    order = sorted(range(len(sentences)), key=lambda i: (-scores[i], i))
    return [RankedItem(i, sentences[i], float(scores[i])) for i in order]


def rank_evidence(params: RegressorParams, query_umr: str, sentences: Sequence[str]) -> list[RankedItem]:
    if not sentences:
        raise ValueError("nothing to rank")
    X = feature_matrix([query_umr] * len(sentences), sentences, params.dim)
    return rank_by_scores(sentences, predict_matrix(params, X).tolist())


class ScoreExchangeError(ValueError):
    pass


class ScoreRequest(NamedTuple):
    id: str
    query: str
    sentence: str


def write_score_requests(path: str | Path, requests: Sequence[ScoreRequest]) -> int:
    return write_jsonl(path, ({"id": r.id, "query": r.query, "sentence": r.sentence} for r in requests))


def read_scores(path: str | Path) -> dict[str, float]:
    scores: dict[str, float] = {}
    for rec in read_jsonl(path):
        key = str(rec["id"])
        if key in scores:
            raise ScoreExchangeError(f"duplicate score for id {key}")
        val = float(rec["score"])
        if not math.isfinite(val):
            raise ScoreExchangeError(f"non-finite score for id {key}")
        scores[key] = val
    return scores


def exchange_external_scores(requests: Sequence[ScoreRequest], scores_file: str | Path) -> list[RankedItem]:
    scores = read_scores(scores_file)
    ordered = []
    for r in requests:
        key = str(r.id)
        if key not in scores:
            raise ScoreExchangeError(f"missing score for id {key}")
        ordered.append(scores[key])
    return rank_by_scores([r.sentence for r in requests], ordered)
