"""Pipeline stages driven by a flat JSON configuration.

Each stage reads JSONL inputs, writes its outputs atomically under
``output_dir`` and returns a small dict of counts for the stage log line.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import evaluation as ev
from .expansion import CentralityConfig, expand_query
from .genprep import NUM_BINS, LengthBinTable, build_length_bins, oracle_order, prepare_generator_input
from .jsonio import atomic_open, read_jsonl, write_json, write_jsonl
from .ranker import (
    RegressorParams, ScoreRequest, TrainConfig, exchange_external_scores, feature_matrix,
    predict_matrix, rank_evidence, train, write_score_requests,
)
from .rouge import TargetConfig
from .supervision import (
    CorpusRecord, SamplingPolicy, TrainingPair, build_corpus_pairs, load_corpus, record_seed,
)
from .synth import build_synthetic
from .text import smooth_idf, tokenize, word_count
from .umr import (
    MaskPolicy, QueryLexicon, default_slot_stoplist, load_propositions, mask_query, proxy_query, render_umr,
)

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
TINY_CORPUS = DATA_DIR / "tiny_corpus.jsonl"
TINY_QUERIES = DATA_DIR / "tiny_queries.jsonl"


@dataclass
class PipelineConfig:
    corpus: str = str(TINY_CORPUS)
    queries: str = str(TINY_QUERIES)
    output_dir: str = "out"
    pairs: str | None = None
    params: str | None = None
    ranked: str | None = None
    external_scores: str | None = None
    generated: str | None = None
    propositions: str | None = None
    lexicon: str | None = None

    gamma: float = 0.0
    lam: float = 0.15
    seed: int = 0
    include_verbs: bool = False

    granularity: str = "cluster"
    head: int = 20
    tail: int = 20
    dev_fraction: float = 0.1

    learning_rate: float = 0.1
    batch_size: int = 128
    epochs: int = 3

    query_mode: str = "reference"
    expand: bool = False
    expand_budget: int = 100
    lexrank_threshold: float = 0.1
    damping: float = 0.85

    k: list[int] = field(default_factory=lambda: [10, 30, 50])
    word_budget: int = 250
    redundancy_threshold: float = 0.6
    random_seeds: int = 20

    pool: int = 10
    synth_target: int = 250

    genprep_mode: str = "train"
    query_guided: bool = True
    max_tokens: int = 768
    requested_length: int = 250

    gammas: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    folds: int = 5
    workers: int = 1

    # "lambda" is a keyword in Python; accept it in config files
    _ALIASES = {"lambda": "lam"}

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "PipelineConfig":
        names = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, val in raw.items():
            key = cls._ALIASES.get(key, key)
            if key not in names:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = val
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict[str, Any] | None = None) -> "PipelineConfig":
        raw: dict[str, Any] = {}
        if path:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
            if not isinstance(raw, dict):
                raise ValueError("config root must be a JSON object")
        raw.update(overrides or {})
        return cls.from_dict(raw)

    def validate(self) -> None:
        MaskPolicy(self.gamma)
        TargetConfig(self.lam)
        SamplingPolicy(self.granularity, self.head, self.tail)
        TrainConfig(self.learning_rate, self.batch_size, self.epochs, self.seed)
        ev.ExtractBudget(self.word_budget, self.redundancy_threshold)
        CentralityConfig(self.lexrank_threshold, self.damping)
        if self.query_mode not in ("reference", "queries"):
            raise ValueError("query_mode must be 'reference' or 'queries'")
        if self.genprep_mode not in ("train", "infer"):
            raise ValueError("genprep_mode must be 'train' or 'infer'")
        if not 0.0 <= self.dev_fraction < 1.0:
            raise ValueError("dev_fraction must lie in [0, 1)")
        if not self.k or any(int(x) < 1 for x in self.k):
            raise ValueError("k must be a non-empty list of positive integers")
        if any(not 0.0 <= g <= 1.0 for g in self.gammas):
            raise ValueError("gammas must lie in [0, 1]")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        for name in ("expand_budget", "pool", "synth_target", "max_tokens", "requested_length",
                     "random_seeds", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def as_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    def out(self, name: str) -> Path:
        return Path(self.output_dir) / name

    def pairs_path(self) -> Path:
        return Path(self.pairs) if self.pairs else self.out("pairs.jsonl")

    def params_path(self) -> Path:
        return Path(self.params) if self.params else self.out("params.bin")

    def ranked_path(self) -> Path:
        return Path(self.ranked) if self.ranked else self.out("ranked.jsonl")

    def sampling(self) -> SamplingPolicy:
        return SamplingPolicy(self.granularity, self.head, self.tail)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size, self.epochs, self.seed)

    def stoplist(self) -> frozenset[str]:
        return default_slot_stoplist(self.include_verbs)

    def query_lexicon(self) -> QueryLexicon:
        return QueryLexicon.from_file(self.lexicon) if self.lexicon else QueryLexicon.default()


def _require(path: str | Path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input not found: {p}")
    return p


def _corpus(cfg: PipelineConfig) -> list[CorpusRecord]:
    return load_corpus(read_jsonl(_require(cfg.corpus)))


def _queries(cfg: PipelineConfig) -> dict[str, dict[str, Any]]:
    return {str(q["id"]): q for q in read_jsonl(_require(cfg.queries))}


def _references(record: CorpusRecord) -> list[str]:
    refs = record.extra.get("references")
    if refs:
        return [" ".join(r) if isinstance(r, list) else str(r) for r in refs]
    return [" ".join(record.summary)]


def _write_meta(cfg: PipelineConfig, stage: str, counts: dict[str, Any]) -> None:
    write_json(cfg.out(f"{stage}.meta.json"), {"stage": stage, "config": cfg.as_dict(), "counts": counts})


def _proxy(cfg: PipelineConfig, record: CorpusRecord) -> str:
    policy = MaskPolicy(cfg.gamma, record_seed(cfg.seed, record.cluster_id))
    return render_umr(proxy_query(record.summary, policy, cfg.stoplist()))


def _real_query(cfg: PipelineConfig, q: dict[str, Any], record: CorpusRecord | None) -> str:
    narrative = q.get("narrative") or q.get("query") or ""
    if cfg.expand and record is not None:
        narrative = expand_query(narrative, record.sentences(), cfg.expand_budget,
                                 CentralityConfig(cfg.lexrank_threshold, cfg.damping))
    return render_umr(mask_query(q.get("title"), narrative, cfg.query_lexicon()))


def query_for(cfg: PipelineConfig, record: CorpusRecord, queries: dict[str, dict[str, Any]] | None) -> str:
    if cfg.query_mode == "reference":
        return _proxy(cfg, record)
    if queries is None or record.cluster_id not in queries:
        raise ValueError(f"no query for cluster {record.cluster_id}")
    return _real_query(cfg, queries[record.cluster_id], record)


# --- stages -----------------------------------------------------------------

def stage_mask(cfg: PipelineConfig) -> dict[str, Any]:
    """Real queries (``title``/``narrative``) or summaries (``summary``) to UMR strings."""
    rows = list(read_jsonl(_require(cfg.queries)))
    lexicon = cfg.query_lexicon()
    out = []
    for row in rows:
        rid = str(row.get("id", row.get("cluster_id")))
        if "summary" in row:
            policy = MaskPolicy(cfg.gamma, record_seed(cfg.seed, rid))
            m = proxy_query(row["summary"], policy, cfg.stoplist())
        else:
            m = mask_query(row.get("title"), row.get("narrative") or row.get("query") or "", lexicon)
        out.append({"id": rid, "query_umr": render_umr(m), "masks": m.mask_count(), "provenance": m.provenance})
    n = write_jsonl(cfg.out("masked.jsonl"), out)
    return {"inputs": len(rows), "outputs": n}


def stage_pairs(cfg: PipelineConfig) -> dict[str, Any]:
    records = _corpus(cfg)
    props = load_propositions(_require(cfg.propositions)) if cfg.propositions else None
    pairs = build_corpus_pairs(records, cfg.sampling(), cfg.gamma, cfg.seed, TargetConfig(cfg.lam),
                               cfg.stoplist(), cfg.dev_fraction, cfg.workers, props)
    n = write_jsonl(cfg.pairs_path(), (p.to_json() for p in pairs))
    counts = {"inputs": len(records), "outputs": n,
              "dev": sum(1 for p in pairs if p.split == "dev")}
    _write_meta(cfg, "pairs", counts)
    return counts


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) < 2 or np.std(a) == 0 or np.std(b) == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def fit_report(params: RegressorParams, pairs: Sequence[TrainingPair]) -> dict[str, float]:
    if not pairs:
        return {"pairs": 0}
    X = feature_matrix([p.query_umr for p in pairs], [p.sentence for p in pairs], params.dim)
    y = np.array([p.target for p in pairs])
    yhat = predict_matrix(params, X)
    return {"pairs": len(pairs), "pearson_r": _pearson(yhat, y), "mse": float(np.mean((yhat - y) ** 2))}


def stage_train(cfg: PipelineConfig) -> dict[str, Any]:
    pairs = [TrainingPair.from_json(r) for r in read_jsonl(_require(cfg.pairs_path()))]
    train_pairs = [p for p in pairs if p.split == "train"] or pairs
    dev_pairs = [p for p in pairs if p.split == "dev"]
    params = train(train_pairs, cfg.train_config(), {"gamma": cfg.gamma, "lambda": cfg.lam})
    params.save(cfg.params_path())
    counts = {"inputs": len(pairs), "train": len(train_pairs), "history": params.history,
              "dev": fit_report(params, dev_pairs)}
    _write_meta(cfg, "train", counts)
    return counts


def _ranking_json(cluster_id: str, query: str, ranked) -> dict[str, Any]:
    return {"id": cluster_id, "query": query,
            "ranking": [{"index": r.index, "sentence": r.sentence, "score": r.score} for r in ranked]}


def stage_rank(cfg: PipelineConfig, emit_requests: bool = False) -> dict[str, Any]:
    records = _corpus(cfg)
    queries = _queries(cfg) if cfg.query_mode == "queries" else None
    if emit_requests:
        reqs = [ScoreRequest(f"{r.cluster_id}:{i}", query_for(cfg, r, queries), s)
                for r in records for i, s in enumerate(r.sentences())]
        n = write_score_requests(cfg.out("score_requests.jsonl"), reqs)
        return {"inputs": len(records), "outputs": n}
    out = []
    if cfg.external_scores:
        scores_file = _require(cfg.external_scores)
        for r in records:
            q = query_for(cfg, r, queries)
            reqs = [ScoreRequest(f"{r.cluster_id}:{i}", q, s) for i, s in enumerate(r.sentences())]
            out.append(_ranking_json(r.cluster_id, q, exchange_external_scores(reqs, scores_file)))
    else:
        params = RegressorParams.load(_require(cfg.params_path()))
        params.check_finite()
        for r in records:
            q = query_for(cfg, r, queries)
            out.append(_ranking_json(r.cluster_id, q, rank_evidence(params, q, r.sentences())))
    n = write_jsonl(cfg.ranked_path(), out)
    return {"inputs": len(records), "outputs": n}


def stage_expand(cfg: PipelineConfig) -> dict[str, Any]:
    records = {r.cluster_id: r for r in _corpus(cfg)}
    rows = list(read_jsonl(_require(cfg.queries)))
    centrality = CentralityConfig(cfg.lexrank_threshold, cfg.damping)
    out = []
    for q in rows:
        rid = str(q["id"])
        if rid not in records:
            raise ValueError(f"no cluster for query {rid}")
        narrative = q.get("narrative") or q.get("query") or ""
        expanded = expand_query(narrative, records[rid].sentences(), cfg.expand_budget, centrality)
        out.append({**q, "narrative": expanded, "original_narrative": narrative})
    n = write_jsonl(cfg.out("expanded_queries.jsonl"), out)
    return {"inputs": len(rows), "outputs": n}


def _load_ranked(cfg: PipelineConfig) -> dict[str, list[ev.RankedItem]]:
    out = {}
    for row in read_jsonl(_require(cfg.ranked_path())):
        out[str(row["id"])] = [ev.RankedItem(int(r["index"]), r["sentence"], float(r["score"]))
                               for r in row["ranking"]]
    return out


def stage_extract(cfg: PipelineConfig) -> dict[str, Any]:
    ranked = _load_ranked(cfg)
    budget = ev.ExtractBudget(cfg.word_budget, cfg.redundancy_threshold)
    out = []
    for cid in ranked:
        items = ranked[cid]
        idf = smooth_idf(tokenize(it.sentence) for it in items)
        out.append({"id": cid, "sentences": ev.assemble_extract(items, budget, idf)})
    n = write_jsonl(cfg.out("extracts.jsonl"), out)
    return {"inputs": len(ranked), "outputs": n}


def _mean_random_recall(sentences: Sequence[str], refs: Sequence[str], k: int, seeds: int) -> float:
    return sum(ev.recall_at_k(ev.random_rank(sentences, s), refs, k) for s in range(seeds)) / seeds


def stage_eval(cfg: PipelineConfig) -> dict[str, Any]:
    """R@k for the ranker and baselines, plus extract ROUGE F1 for each system."""
    records = _corpus(cfg)
    ranked = _load_ranked(cfg)
    queries = _queries(cfg) if cfg.query_mode == "queries" else None
    generated = {}
    if cfg.generated:
        generated = {str(g["id"]): g["summary"] for g in read_jsonl(_require(cfg.generated))}
    budget = ev.ExtractBudget(cfg.word_budget, cfg.redundancy_threshold)
    systems: dict[str, dict[str, dict[str, Any]]] = {"ranker": {}, "termfreq": {}, "lead": {}, "random": {}}
    if generated:
        systems["generated"] = {}
    for r in records:
        if r.cluster_id not in ranked:
            raise ValueError(f"no ranking for cluster {r.cluster_id}")
        refs = _references(r)
        sents = r.sentences()
        idf = smooth_idf(tokenize(s) for s in sents)
        q = query_for(cfg, r, queries)
        runs = {
            "ranker": ranked[r.cluster_id],
            "termfreq": ev.baseline_rank("termfreq", q, r.documents),
            "lead": ev.baseline_rank("lead", q, r.documents),
        }
        for name, items in runs.items():
            scores: dict[str, Any] = {f"R@{k}": ev.recall_at_k(items, refs, k) for k in cfg.k}
            scores.update(ev.evaluate_extract(ev.assemble_extract(items, budget, idf), refs))
            systems[name][r.cluster_id] = scores
        systems["random"][r.cluster_id] = {
            f"R@{k}": _mean_random_recall(sents, refs, k, cfg.random_seeds) for k in cfg.k
        }
        if generated and r.cluster_id in generated:
            summ = generated[r.cluster_id]
            summ = summ if isinstance(summ, list) else [summ]
            systems["generated"][r.cluster_id] = dict(ev.evaluate_extract(summ, refs))
    report = {name: ev.macro_report(per_q) for name, per_q in systems.items()}
    write_json(cfg.out("report.json"), report)
    columns = [f"R@{k}" for k in cfg.k] + ["R1", "R2", "SU4"]
    rows = [(name, {c: rep["macro"][c] for c in columns if c in rep["macro"]}) for name, rep in report.items()]
    with atomic_open(cfg.out("report.csv")) as fh:
        fh.write(ev.report_csv(rows, columns))
    return {"inputs": len(records), "outputs": len(report),
            "macro": {name: rep["macro"] for name, rep in report.items()}}


def stage_synth(cfg: PipelineConfig) -> dict[str, Any]:
    records = _corpus(cfg)
    clusters = build_synthetic(records, cfg.pool, cfg.synth_target, cfg.redundancy_threshold)
    n = write_jsonl(cfg.out("synthetic.jsonl"), (c.to_record().to_json() for c in clusters))
    counts = {"inputs": len(records), "outputs": n,
              "mean_size": sum(c.size for c in clusters) / max(len(clusters), 1)}
    _write_meta(cfg, "synth", counts)
    return counts


def stage_genprep(cfg: PipelineConfig) -> dict[str, Any]:
    """Generator inputs.

    ``train`` mode orders each cluster's sentences by ROUGE-2 against its
    reference, uses the proxy query and the reference length.  ``infer`` mode
    takes the ranked evidence, the configured query source and
    ``requested_length``.
    """
    records = _corpus(cfg)
    lengths = [word_count(" ".join(r.summary)) for r in records]
    bins_path = cfg.out("length_bins.json")
    if cfg.genprep_mode == "train" or not bins_path.exists():
        # small corpora may not have NUM_BINS distinct lengths
        bins = build_length_bins(lengths, min(NUM_BINS, len(set(lengths))))
        write_json(bins_path, bins.to_json())
    else:
        bins = LengthBinTable.from_json(json.loads(bins_path.read_text(encoding="utf-8")))
    queries = _queries(cfg) if cfg.query_mode == "queries" else None
    ranked = _load_ranked(cfg) if cfg.genprep_mode == "infer" else {}
    out = []
    for r, length in zip(records, lengths):
        if cfg.genprep_mode == "train":
            evidence = oracle_order(r.sentences(), tokenize(" ".join(r.summary)))
            requested = length
        else:
            evidence = [it.sentence for it in ranked[r.cluster_id]]
            requested = cfg.requested_length
        query = query_for(cfg, r, queries) if cfg.query_guided else None
        gi = prepare_generator_input(evidence, query, requested, bins, cfg.max_tokens, r.cluster_id)
        out.append(gi.to_json())
    n = write_jsonl(cfg.out("generator_inputs.jsonl"), out)
    return {"inputs": len(records), "outputs": n, "bins": len(bins.bins)}


def _fold_of(cluster_ids: Sequence[str], folds: int) -> dict[str, int]:
    order = sorted(cluster_ids, key=lambda c: (hashlib.blake2b(c.encode(), digest_size=8).digest(), c))
    return {c: i % folds for i, c in enumerate(order)}


def gamma_sweep(records: Sequence[CorpusRecord], gammas: Sequence[float], cfg: PipelineConfig) -> list[dict[str, float]]:
    """Cluster-level cross-validated fit quality of the regressor at each reveal ratio."""
    folds = min(cfg.folds, len(records))
    if folds < 2:
        raise ValueError("gamma sweep needs at least two clusters")
    fold = _fold_of([r.cluster_id for r in records], folds)
    rows = []
    for gamma in gammas:
        pairs = build_corpus_pairs(records, cfg.sampling(), gamma, cfg.seed, TargetConfig(cfg.lam),
                                   cfg.stoplist(), cfg.dev_fraction, cfg.workers)
        preds, ys = [], []
        for k in range(folds):
            tr = [p for p in pairs if fold[p.cluster_id] != k]
            te = [p for p in pairs if fold[p.cluster_id] == k]
            if not tr or not te:
                continue
            params = train(tr, cfg.train_config())
            X = feature_matrix([p.query_umr for p in te], [p.sentence for p in te], params.dim)
            preds.extend(predict_matrix(params, X).tolist())
            ys.extend(p.target for p in te)
        yhat, y = np.array(preds), np.array(ys)
        mse = float(np.mean((yhat - y) ** 2))
        if not math.isfinite(mse):
            raise FloatingPointError(f"non-finite MSE at gamma={gamma}")
        rows.append({"gamma": float(gamma), "pearson_r": _pearson(yhat, y), "mse": mse})
    return rows


def stage_gamma_sweep(cfg: PipelineConfig) -> dict[str, Any]:
    records = _corpus(cfg)
    rows = gamma_sweep(records, cfg.gammas, cfg)
    with atomic_open(cfg.out("gamma_sweep.csv")) as fh:
        fh.write("gamma,pearson_r,mse\n")
        for row in rows:
            fh.write(f"{row['gamma']},{row['pearson_r']:.6f},{row['mse']:.6f}\n")
    return {"inputs": len(records), "outputs": len(rows), "rows": rows}


STAGES = {
    "mask": stage_mask,
    "pairs": stage_pairs,
    "train": stage_train,
    "rank": stage_rank,
    "expand": stage_expand,
    "extract": stage_extract,
    "eval": stage_eval,
    "synth": stage_synth,
    "genprep": stage_genprep,
    "gamma-sweep": stage_gamma_sweep,
}
