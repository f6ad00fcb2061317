"""Vocabulary, readers, and the toy grammar generator."""

import time

import numpy as np
import pytest

from structlab.corpus import (
    MASK_ID,
    PAD_ID,
    RESERVED,
    UNK_ID,
    Vocab,
    build_vocab,
    default_is_punct,
    read_bracketed,
    read_conll,
    read_raw,
    toy_grammar_generate,
    write_conll,
    write_raw,
)
from structlab.errors import DataError
from structlab.structures import tree_leaves, tree_spans


# ---------------------------------------------------------------------------
# vocabulary


def test_low_frequency_tokens_fall_out():
    v = build_vocab([["a", "a", "b"]], min_freq=2)
    assert set(v.tokens) == set(RESERVED) | {"a"}
    assert v.encode(["a", "b"]) == [3, UNK_ID]


def test_threshold_one_keeps_everything():
    v = build_vocab([["c", "a", "b", "a"]], min_freq=1)
    assert set(v.tokens) == set(RESERVED) | {"a", "b", "c"}
    # frequency then lexicographic
    assert v.tokens[3:] == ["a", "b", "c"]


def test_vocab_deterministic_across_runs():
    sents = [["x", "y"], ["y", "z"], ["z", "y"]]
    assert build_vocab(sents).tokens == build_vocab(sents).tokens


def test_reserved_ids_fixed():
    v = build_vocab([["w"]])
    assert v.encode(["<pad>", "<unk>", "<mask>"]) == [PAD_ID, UNK_ID, MASK_ID]


def test_empty_corpus_fails():
    with pytest.raises(DataError, match="empty"):
        build_vocab([])


def test_vocab_round_trip(tmp_path):
    v = build_vocab([["b", "a", "b"]])
    path = tmp_path / "vocab.txt"
    v.save(path)
    assert Vocab.load(path).tokens == v.tokens


# ---------------------------------------------------------------------------
# bracketed reader


def test_simple_tree(tmp_path):
    path = tmp_path / "trees.txt"
    path.write_text("(S (NP I) (VP like (NP cats)))\n")
    (sent,) = read_bracketed(path)
    assert sent.tokens == ["I", "like", "cats"]
    assert sent.spans == {(0, 2), (1, 2)}
    assert ("S", 0, 2) in sent.labeled_spans and ("VP", 1, 2) in sent.labeled_spans


def test_single_token_tree_has_no_spans(tmp_path):
    path = tmp_path / "trees.txt"
    path.write_text("(S (NN word))\n")
    (sent,) = read_bracketed(path)
    assert sent.tokens == ["word"] and sent.spans == set()


def test_punctuation_stripped_and_reindexed(tmp_path):
    path = tmp_path / "trees.txt"
    path.write_text("(S (NP (DT the) (NN cat)) (, ,) (VP (VB sleeps)))\n")
    (sent,) = read_bracketed(path)
    assert sent.tokens == ["the", "cat", ",", "sleeps"]
    assert sent.punct == [False, False, True, False]
    assert sent.stripped_tokens == ["the", "cat", "sleeps"]
    # NP keeps (0,1); S covers stripped indices 0..2
    assert sent.spans == {(0, 1), (0, 2)}


def test_unbalanced_brackets_fail_with_line(tmp_path):
    path = tmp_path / "trees.txt"
    path.write_text("(S (NP a)\n(S (NP b))\n")
    with pytest.raises(DataError, match="line 1"):
        read_bracketed(path)


def test_nonbinary_tree_allowed(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("(S (A x) (B y) (C z))\n")
    (sent,) = read_bracketed(path)
    assert sent.tokens == ["x", "y", "z"]
    assert sent.spans == {(0, 2)}


# ---------------------------------------------------------------------------
# conll reader


CONLL = ("1\tI\t_\t_\t_\t_\t2\t_\t_\t_\n"
         "2\tlike\t_\t_\t_\t_\t0\t_\t_\t_\n"
         "3\tcats\t_\t_\t_\t_\t2\t_\t_\t_\n"
         "\n")


def test_conll_three_token_fixture(tmp_path):
    path = tmp_path / "d.conll"
    path.write_text(CONLL)
    (sent,) = read_conll(path)
    assert sent.tokens == ["I", "like", "cats"]
    assert sent.parents == [1, -1, 1]


def test_conll_empty_file(tmp_path):
    path = tmp_path / "d.conll"
    path.write_text("")
    assert read_conll(path) == []


def test_conll_malformed_row_names_line(tmp_path):
    path = tmp_path / "d.conll"
    path.write_text("1\tI\t_\t_\t_\t_\t2\t_\t_\t_\nbroken row\n")
    with pytest.raises(DataError, match="line 2"):
        read_conll(path)


def test_conll_round_trip(tmp_path):
    path = tmp_path / "d.conll"
    path.write_text(CONLL * 3)
    sentences = read_conll(path)
    out = tmp_path / "copy.conll"
    write_conll(out, sentences)
    again = read_conll(out)
    assert [s.tokens for s in again] == [s.tokens for s in sentences]
    assert [s.parents for s in again] == [s.parents for s in sentences]


def test_punctuation_predicate():
    assert default_is_punct(",") and default_is_punct("...") and default_is_punct("?!")
    assert not default_is_punct("word") and not default_is_punct("o'clock")


# ---------------------------------------------------------------------------
# raw reader


def test_read_raw_counts(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("a b c\n\nd e\n")
    assert read_raw(path) == [["a", "b", "c"], ["d", "e"]]


# ---------------------------------------------------------------------------
# toy grammar


def test_same_seed_same_corpus():
    a = toy_grammar_generate(7, 50)
    b = toy_grammar_generate(7, 50)
    assert [s.tokens for s in a] == [s.tokens for s in b]
    assert [s.parents for s in a] == [s.parents for s in b]


def test_different_seeds_differ():
    a = toy_grammar_generate(7, 50)
    b = toy_grammar_generate(8, 50)
    assert [s.tokens for s in a] != [s.tokens for s in b]


def test_gold_dependency_count_and_tree_shape():
    for s in toy_grammar_generate(1, 100):
        n = len(s.tokens)
        assert 4 <= n <= 20
        assert sum(1 for p in s.parents if p == -1) == 1
        assert sum(1 for p in s.parents if p >= 0) == n - 1
        assert tree_leaves(s.tree) == list(range(n))
        assert s.spans == tree_spans(s.tree)
        labels = {lab for lab, _, _ in s.labeled_spans}
        assert labels <= {"S", "NP", "Nbar", "VP", "PP"}


def test_vocab_size_about_one_hundred():
    sents = toy_grammar_generate(3, 3000)
    vocab = {t for s in sents for t in s.tokens}
    assert 80 <= len(vocab) <= 110


def test_generation_budget():
    start = time.monotonic()
    sents = toy_grammar_generate(11, 5000)
    assert time.monotonic() - start < 10.0
    assert len(sents) == 5000


def test_toy_files_round_trip(tmp_path):
    sents = toy_grammar_generate(5, 20)
    raw = tmp_path / "corpus.txt"
    write_raw(raw, sents)
    assert read_raw(raw) == [s.tokens for s in sents]
    from structlab.corpus import write_bracketed
    trees = tmp_path / "trees.txt"
    write_bracketed(trees, sents)
    gold = read_bracketed(trees)
    assert [g.tokens for g in gold] == [s.tokens for s in sents]
    assert [g.spans for g in gold] == [s.spans for s in sents]
    deps = tmp_path / "deps.conll"
    write_conll(deps, sents)
    again = read_conll(deps)
    assert [g.parents for g in again] == [s.parents for s in sents]
