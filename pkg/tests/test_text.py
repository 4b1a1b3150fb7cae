import math

import pytest
from hypothesis import given, strategies as st

from qfsmodel.text import (
    SparseVector, cosine, fnv1a_64, hashed_features, smooth_idf, split_sentences, tokenize,
    truncate_tokens, truncate_words, vectorize_hashed_bigrams, vectorize_tfidf, word_count,
)

words = st.lists(st.sampled_from(["a", "b", "c", "dd", "e1", "x"]), max_size=12)


@pytest.mark.parametrize("text,toks,wc", [
    ("", [], 0),
    ("Hello, World!", ["hello", ",", "world", "!"], 2),
    ("3-day visit", ["3", "-", "day", "visit"], 3),
    ("snake_case", ["snake", "_", "case"], 2),
])
def test_tokenize_examples(text, toks, wc):
    t = tokenize(text)
    assert list(t) == toks
    assert t.word_count == wc == word_count(text)


@pytest.mark.parametrize("text,sents", [
    ("A cat. The dog.", ["A cat.", "The dog."]),
    ("Mr. smith left.", ["Mr. smith left."]),
    ("", []),
    ("Why? 42 left! \"Done.\" Ok", ["Why?", "42 left!", "\"Done.\" Ok"]),
])
def test_split_sentences_examples(text, sents):
    assert split_sentences(text) == sents


@given(st.text(alphabet="ab. ?!AB\"1\n", max_size=60))
def test_split_sentences_keeps_non_whitespace(text):
    joined = "".join(split_sentences(text))
    assert joined.replace(" ", "").replace("\n", "") == text.replace(" ", "").replace("\n", "")


def test_truncation_cuts_original_text():
    assert truncate_words("One, two three four.", 2) == "One, two"
    assert truncate_words("a b", 5) == "a b"
    assert truncate_tokens("One, two three", 2) == "One,"


def test_tfidf_examples():
    assert vectorize_tfidf(["a", "a", "b"], {"a": 1, "b": 2}).entries == {"a": 2, "b": 2}
    assert vectorize_tfidf([]).entries == {}
    assert vectorize_tfidf(["a"], {}).entries == {"a": 1}


def test_smooth_idf():
    idf = smooth_idf([["a", "b"], ["a"]])
    assert idf["a"] == pytest.approx(math.log(2))
    assert idf["b"] == pytest.approx(math.log(3))


def test_fnv1a_known_vectors():
    assert fnv1a_64("") == 0xCBF29CE484222325
    assert fnv1a_64("a") == 0xAF63DC4C8601EC8C


def test_hashed_bigrams_examples():
    assert vectorize_hashed_bigrams([]).entries == {}
    assert hashed_features(["a", "b"]) == ["a", "b", "a b"]
    v = vectorize_hashed_bigrams(["a", "b"], dim=16)
    assert sum(v.entries.values()) == 3
    assert all(0 <= i < 16 for i in v.entries)
    assert v == vectorize_hashed_bigrams(["a", "b"], dim=16)
    with pytest.raises(ValueError):
        vectorize_hashed_bigrams(["a"], dim=10)


@given(words, st.randoms(use_true_random=False))
def test_hashed_unigram_part_is_order_free(toks, rnd):
    shuffled = list(toks)
    rnd.shuffle(shuffled)
    uni = lambda ts: sorted(f for f in hashed_features(ts) if " " not in f)
    assert uni(toks) == uni(shuffled)


def test_cosine_examples():
    x = SparseVector({"a": 1.0, "b": 3.0})
    assert cosine(x, x) == 1.0
    assert cosine(SparseVector({"a": 1.0}), SparseVector({"b": 1.0})) == 0.0
    assert cosine(SparseVector({"a": 1, "b": 1}), SparseVector({"a": 1})) == pytest.approx(1 / math.sqrt(2))
    assert cosine(SparseVector({}), x) == 0.0
    with pytest.raises(ValueError):
        cosine(SparseVector({1: 1.0}, 4), SparseVector({1: 1.0}, 8))


def test_sparse_vector_validation():
    with pytest.raises(ValueError):
        SparseVector({1: float("nan")}, 4)
    with pytest.raises(ValueError):
        SparseVector({9: 1.0}, 4)
    assert SparseVector({1: 0.0, 2: 1.0}, 4).entries == {2: 1.0}


@given(words, words)
def test_cosine_symmetric_and_bounded(a, b):
    u, v = vectorize_tfidf(a), vectorize_tfidf(b)
    c = cosine(u, v)
    assert c == cosine(v, u)
    assert 0.0 <= c <= 1.0


@given(st.text(max_size=40))
def test_tokenize_is_pure(text):
    assert tokenize(text) == tokenize(text)
    assert all(t == t.lower() for t in tokenize(text))
