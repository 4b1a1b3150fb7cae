import math
import random

import pytest
from hypothesis import given, strategies as st

import oracles
from qfsmodel.supervision import CorpusRecord, Document
from qfsmodel.synth import (
    build_index, build_synthetic, choose_cluster_size, dedup_sentences, form_cluster, neighbor_scores,
    retrieve_neighbors,
)
from qfsmodel.text import cosine, hashed_features, tokenize


def _rec(cid, summary):
    return CorpusRecord(cid, [Document("a", [f"Body of {cid}."])], summary)


def test_idf_values():
    idx = build_index([("x", ["storm", "rain"]), ("y", ["storm"])])
    assert idx.idf["storm"] == 0.0
    idx = build_index([("a", ["cat"]), ("b", ["dog"]), ("c", ["eel"]), ("d", ["fox"])])
    assert idx.idf["cat"] == pytest.approx(math.log(4))
    again = build_index([("a", ["cat"]), ("b", ["dog"]), ("c", ["eel"]), ("d", ["fox"])])
    assert idx.to_bytes() == again.to_bytes()


def test_index_validation():
    with pytest.raises(ValueError):
        build_index([("a", ["x"])])
    with pytest.raises(ValueError):
        build_index([("a", ["x"]), ("a", ["y"])])
    idx = build_index([("a", ["x"]), ("b", ["y"])])
    with pytest.raises(KeyError):
        retrieve_neighbors(idx, "zzz")


def test_retrieval_examples():
    docs = [("q", tokenize("storm floods coastal towns")), ("twin", tokenize("storm floods coastal towns")),
            ("far", tokenize("election results announced")), ("mid", tokenize("storm hits towns")),
            ("z", tokenize("stock prices fall"))]
    idx = build_index(docs)
    assert retrieve_neighbors(idx, "q", 1) == ["twin"]
    disjoint = [sid for sid, s in neighbor_scores(idx, "q") if s == 0.0]
    assert disjoint == sorted(disjoint)


def _brute_neighbors(docs, qid):
    # dense cosine over the hashed vectors, computed pair by pair
    idx = build_index(docs)
    pos = {d: i for i, (d, _) in enumerate(docs)}
    q = idx.vectors[pos[qid]]
    scored = [(d, cosine(q, idx.vectors[pos[d]])) for d, _ in docs if d != qid]
    return sorted(scored, key=lambda x: (-x[1], x[0]))


def test_retrieval_matches_exhaustive_cosine():
    rng = random.Random(5)
    vocab = ["storm", "rain", "flood", "vote", "poll", "team", "win", "goal"]
    for _ in range(30):
        docs = [(f"s{i}", [rng.choice(vocab) for _ in range(rng.randint(1, 8))]) for i in range(rng.randint(3, 8))]
        for qid, _ in docs:
            got = neighbor_scores(build_index(docs), qid)
            want = _brute_neighbors(docs, qid)
            assert [g[0] for g in got] == [w[0] for w in want]
            assert [g[1] for g in got] == pytest.approx([w[1] for w in want], abs=1e-12)


def test_idf_by_hand():
    docs = [("a", ["x", "y"]), ("b", ["x"]), ("c", ["z"])]
    idx = build_index(docs)
    for feat in set(hashed_features(["x", "y"])) | {"z"}:
        df = sum(feat in hashed_features(t) for _, t in docs)
        assert idx.idf[feat] == pytest.approx(math.log(3 / df))


def test_cluster_size_examples():
    assert choose_cluster_size(250, [10, 20]) == 1
    assert choose_cluster_size(120, [80, 90, 100]) == 3
    assert choose_cluster_size(200, [100]) == 1
    with pytest.raises(ValueError):
        choose_cluster_size(10, [], target=0)


@given(st.integers(1, 400), st.lists(st.integers(1, 200), max_size=12), st.integers(1, 600))
def test_cluster_size_matches_scan(own, neighbors, target):
    assert choose_cluster_size(own, neighbors, target) == oracles.cluster_size_scan(own, neighbors, target)


def test_dedup():
    assert dedup_sentences(["A b c.", "x y z.", "A b c."]) == ["A b c.", "x y z."]
    # cosine 0.75 with the first sentence, above threshold
    near = ["a b c d", "a b c e"]
    assert oracles.tf_cosine(*near) == pytest.approx(0.75)
    assert dedup_sentences(near + ["q r s"]) == ["a b c d", "q r s"]


@given(st.lists(st.lists(st.sampled_from("abcde"), min_size=1, max_size=5).map(" ".join), max_size=10))
def test_dedup_idempotent_and_ordered(sents):
    once = dedup_sentences(sents)
    assert dedup_sentences(once) == once
    it = iter(sents)
    assert all(any(s == x for x in it) for s in once)


def test_form_cluster():
    a = _rec("a", ["Storm hits the coast.", "Towns flooded."])
    b = _rec("b", ["Storm hits the coast.", "Towns flooded."])
    c = _rec("c", ["Markets fell sharply."])
    one = form_cluster(a, [b, c], 1)
    assert [d.doc_id for d in one.documents] == ["a/a"] and one.final_summary == a.summary
    two = form_cluster(a, [b, c], 2)
    assert two.raw_summary == a.summary + b.summary and two.final_summary == a.summary
    three = form_cluster(a, [b, c], 3)
    assert three.final_summary == a.summary + c.summary
    assert [d.doc_id for d in three.documents] == ["a/a", "b/a", "c/a"]
    with pytest.raises(ValueError):
        form_cluster(a, [b], 3)


def test_build_synthetic_sizes():
    recs = [_rec(f"r{i}", [" ".join(["word"] * 40) + f" topic{i % 3}."]) for i in range(12)]
    clusters = build_synthetic(recs, pool=10, target=250)
    # 40 words each: N=6 gives 240, the closest total to 250
    assert all(c.size == 6 for c in clusters)
    rec = clusters[0].to_record()
    assert rec.extra["synthetic_size"] == 6 and len(rec.documents) == 6
