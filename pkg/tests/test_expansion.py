import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from qfsmodel.expansion import (
    CentralityConfig, append_by_rank, centrality_order, expand_query, lexrank_scores, transition_matrix,
)

sentences = st.lists(
    st.lists(st.sampled_from(["red", "blue", "green", "cat", "dog", "sky"]), min_size=1, max_size=6).map(" ".join),
    min_size=1, max_size=8,
)


def test_symmetric_inputs():
    assert lexrank_scores(["same words here"] * 4) == pytest.approx([0.25] * 4, abs=1e-12)
    assert lexrank_scores(["alone"]) == [1.0]
    with pytest.raises(ValueError):
        lexrank_scores([])


def test_four_sentence_toy_graph():
    sents = ["the storm hit the coast", "the storm flooded the coast", "rain fell in the hills", "markets rose"]
    got = np.array(lexrank_scores(sents))
    assert np.max(np.abs(got - oracles.lexrank_dense(sents))) <= 1e-6
    # its only edge is the self loop, so p = d*p + (1-d)/n gives exactly 1/n
    assert got[3] == pytest.approx(0.25)


def test_isolated_rows_become_uniform():
    A = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    M = transition_matrix(A)
    assert M[1].tolist() == pytest.approx([1 / 3] * 3)


@settings(max_examples=60)
@given(sentences)
def test_scores_form_a_distribution(sents):
    scores = lexrank_scores(sents)
    assert all(s >= 0 for s in scores)
    assert sum(scores) == pytest.approx(1.0, abs=1e-9)
    assert np.max(np.abs(np.array(scores) - oracles.lexrank_dense(sents))) <= 1e-6


def test_config_validation():
    with pytest.raises(ValueError):
        CentralityConfig(damping=1.0)
    with pytest.raises(ValueError):
        CentralityConfig(similarity_threshold=1.0)


def test_greedy_skip_trace():
    sents = ["w " * 10, "w " * 8, "w " * 4]
    assert append_by_rank("q", sents, [0, 1, 2], 15) == " ".join(["q", sents[0], sents[2]])


def test_expand_edges():
    sents = ["one two three four five six", "seven eight nine ten eleven twelve"]
    assert expand_query("my query", sents, word_budget=3) == "my query"
    assert expand_query("q", []) == "q"
    full = expand_query("q", sents, word_budget=100)
    order = centrality_order(lexrank_scores(sents))
    assert full == " ".join(["q"] + [sents[i] for i in order])
    with pytest.raises(ValueError):
        expand_query("q", sents, word_budget=0)


@settings(max_examples=40)
@given(sentences, st.integers(1, 30))
def test_expansion_keeps_query_prefix(sents, budget):
    out = expand_query("Original Query?", sents, budget)
    assert out.startswith("Original Query?")


def test_centrality_ties_break_by_index():
    assert centrality_order([0.2, 0.5, 0.2, 0.5]) == [1, 3, 0, 2]
    rng = random.Random(0)
    scores = [rng.choice([0.1, 0.2]) for _ in range(20)]
    order = centrality_order(scores)
    assert order == sorted(range(20), key=lambda i: (-scores[i], i))
