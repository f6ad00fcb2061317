"""Corpus ingestion: vocabulary, bracketed-tree and CoNLL readers, plus a
built-in toy grammar that generates sentences with gold trees and
head-percolated dependencies.

File formats: raw corpora are UTF-8 with one space-separated sentence per
line; trees are Penn-style, one per line; dependency files are the CoNLL-X
10-column layout of which columns 1 (index), 2 (form) and 7 (head, 0 for
root) are consumed.  Vocabulary files carry one token per line, the line
number giving the id after the reserved block.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

PAD, UNK, MASK = "<pad>", "<unk>", "<mask>"
RESERVED = (PAD, UNK, MASK)
PAD_ID, UNK_ID, MASK_ID = 0, 1, 2


def default_is_punct(token: str) -> bool:
    return len(token) > 0 and all(not ch.isalnum() for ch in token)


@dataclass
class Vocab:
    """Token/id bijection with reserved ids for padding, unknown, mask."""

    tokens: list

    def __post_init__(self):
        if list(self.tokens[:3]) != list(RESERVED):
            raise DataError("vocab: reserved tokens must head the table")
        if len(set(self.tokens)) != len(self.tokens):
            raise DataError("vocab: duplicate tokens")
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def encode(self, words):
        return [self.index.get(w, UNK_ID) for w in words]

    def decode(self, ids):
        return [self.tokens[i] for i in ids]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for t in self.tokens[len(RESERVED):]:
                fh.write(t + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls(list(RESERVED) + [ln.rstrip("\n") for ln in fh if ln.strip()])


def build_vocab(sentences, min_freq=1) -> Vocab:
    """Count tokens and keep those at or above the frequency threshold,
    ordered by descending frequency then lexicographically."""
    counts = Counter()
    n_sents = 0
    for sent in sentences:
        n_sents += 1
        counts.update(sent)
    if n_sents == 0 or not counts:
        raise DataError("build_vocab: empty corpus")
    kept = sorted((t for t, c in counts.items() if c >= min_freq),
                  key=lambda t: (-counts[t], t))
    return Vocab(list(RESERVED) + kept)


def read_raw(path) -> list:
    """One sentence per line, whitespace tokens; empty lines are skipped but
    counted so nothing is dropped silently."""
    sentences, skipped = [], 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            toks = line.split()
            if toks:
                sentences.append(toks)
            else:
                skipped += 1
    log.info("read_raw %s: %d sentences, %d empty lines", path, len(sentences), skipped)
    return sentences


# ---------------------------------------------------------------------------
# gold structures


@dataclass
class GoldSentence:
    """Tokens with optional gold constituency spans and/or gold parents.

    Spans index the punctuation-stripped token sequence (inclusive bounds,
    multi-word only, whole sentence included); parents use the original
    indexing with -1 at the root.
    """

    tokens: list
    punct: list
    spans: Optional[set] = None
    labeled_spans: Optional[list] = None     # (label, start, end)
    parents: Optional[list] = None

    @property
    def stripped_tokens(self):
        return [t for t, p in zip(self.tokens, self.punct) if not p]


def _tokenize_sexpr(line):
    return line.replace("(", " ( ").replace(")", " ) ").split()


def _parse_sexpr(toks, pos, lineno):
    if toks[pos] != "(":
        return toks[pos], pos + 1
    pos += 1
    if pos >= len(toks):
        raise DataError(f"line {lineno}: unbalanced brackets")
    label = toks[pos] if toks[pos] not in "()" else ""
    if toks[pos] not in "()":
        pos += 1
    children = []
    while pos < len(toks) and toks[pos] != ")":
        child, pos = _parse_sexpr(toks, pos, lineno)
        children.append(child)
    if pos >= len(toks):
        raise DataError(f"line {lineno}: unbalanced brackets")
    if not children:
        raise DataError(f"line {lineno}: empty constituent")
    return (label, children), pos + 1


def _tree_leaves_labeled(node, out):
    if isinstance(node, str):
        out.append(node)
        return
    label, children = node
    if len(children) == 1 and isinstance(children[0], str):
        out.append(children[0])   # preterminal
        return
    for c in children:
        _tree_leaves_labeled(c, out)


def _collect_spans(node, next_leaf, spans):
    """Returns (start, end) of the node over kept leaf indices, or None if
    the node covers no kept leaves; `next_leaf` is a mutable counter."""
    if isinstance(node, str) or (
            len(node[1]) == 1 and isinstance(node[1][0], str)):
        word = node if isinstance(node, str) else node[1][0]
        if word is None:
            return None
        idx = next_leaf[0]
        next_leaf[0] += 1
        return idx, idx
    label, children = node
    lo = hi = None
    for c in children:
        got = _collect_spans(c, next_leaf, spans)
        if got is None:
            continue
        lo = got[0] if lo is None else lo
        hi = got[1]
    if lo is None:
        return None
    if hi > lo:
        spans.append((label, lo, hi))
    return lo, hi


def _strip_punct_tree(node, is_punct):
    """Replace punctuation leaves by None and drop emptied constituents."""
    if isinstance(node, str):
        return None if is_punct(node) else node
    label, children = node
    if len(children) == 1 and isinstance(children[0], str):
        return None if is_punct(children[0]) else (label, children)
    kept = []
    for c in children:
        got = _strip_punct_tree(c, is_punct)
        if got is not None:
            kept.append(got)
    if not kept:
        return None
    return (label, kept)


def read_bracketed(path, is_punct=default_is_punct) -> list:
    """Penn-style trees, one per line; labels are kept for per-label recall,
    punctuation leaves are removed before spans are extracted."""
    out = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        toks = _tokenize_sexpr(line)
        tree, pos = _parse_sexpr(toks, 0, lineno)
        if pos != len(toks):
            raise DataError(f"line {lineno}: trailing content after tree")
        words = []
        _tree_leaves_labeled(tree, words)
        punct = [is_punct(w) for w in words]
        stripped = _strip_punct_tree(tree, is_punct)
        labeled = []
        if stripped is not None:
            _collect_spans(stripped, [0], labeled)
        out.append(GoldSentence(
            tokens=words, punct=punct,
            spans={(s, e) for _, s, e in labeled},
            labeled_spans=labeled))
    return out


def read_conll(path, is_punct=default_is_punct) -> list:
    """CoNLL-X subset: columns 1, 2, 7 (index, form, head)."""
    out = []
    tokens, parents = [], []

    def flush(lineno):
        if not tokens:
            return
        n = len(tokens)
        for i, p in enumerate(parents):
            if p < -1 or p >= n:
                raise DataError(f"line {lineno}: head out of range for token {i + 1}")
        out.append(GoldSentence(
            tokens=list(tokens), punct=[is_punct(t) for t in tokens],
            parents=list(parents)))
        tokens.clear()
        parents.clear()

    with open(path, encoding="utf-8") as fh:
        lineno = 0
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush(lineno)
                continue
            cols = line.split("\t")
            if len(cols) < 7:
                raise DataError(f"line {lineno}: expected >= 7 tab-separated "
                                f"columns, got {len(cols)}")
            try:
                idx = int(cols[0])
                head = int(cols[6])
            except ValueError:
                raise DataError(f"line {lineno}: non-integer index or head") from None
            if idx != len(tokens) + 1:
                raise DataError(f"line {lineno}: token index {idx} out of order")
            tokens.append(cols[1])
            parents.append(head - 1)
        flush(lineno + 1)
    return out


def write_conll(path, sentences):
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            for i, (tok, head) in enumerate(zip(sent.tokens, sent.parents), start=1):
                cols = [str(i), tok, "_", "_", "_", "_", str(head + 1), "_", "_", "_"]
                fh.write("\t".join(cols) + "\n")
            fh.write("\n")


# ---------------------------------------------------------------------------
# toy grammar


TOY_RULES = {
    "S": [(1.00, ("NP", "VP"), 1)],
    "NP": [(0.62, ("Det", "Nbar"), 1), (0.18, ("Pron",), 0), (0.20, ("Name",), 0)],
    "Nbar": [(0.35, ("Adj", "Nbar"), 1), (0.20, ("Noun", "PP"), 0),
             (0.45, ("Noun",), 0)],
    "VP": [(0.45, ("TV", "NP"), 0), (0.15, ("IV",), 0), (0.18, ("VP", "PP"), 0),
           (0.22, ("IV", "Adv"), 0)],
    "PP": [(1.00, ("P", "NP"), 0)],
}

TOY_WORDS = {
    "Det": "the a every some no this that".split(),
    "Noun": ("cat dog bird fish horse farmer teacher doctor child friend "
             "river garden house school market song letter stone road "
             "basket window lamp").split(),
    "Adj": ("old young happy quiet bright small tall green heavy gentle "
            "clever tired brave strange").split(),
    "TV": ("sees likes follows helps finds carries greets watches chases "
           "teaches paints feeds").split(),
    "IV": "sleeps runs sings laughs waits dreams walks swims".split(),
    "Adv": "slowly quickly often quietly early late again together".split(),
    "P": "in on near behind under beside across".split(),
    "Pron": "he she it we they you i".split(),
    "Name": ("anna ben clara david emma felix grace henry iris jonas karla "
             "leo mira noah otto").split(),
}


@dataclass
class ToySentence:
    tokens: list
    tree: object                  # nested (left, right) tuples over indices
    labeled_spans: list           # (label, start, end), multi-word
    parents: list                 # -1 at root
    bracketed: str

    @property
    def spans(self):
        return {(s, e) for _, s, e in self.labeled_spans}


def _expand_symbol(symbol, rng, depth):
    """Returns (tokens, node) where node is a leaf dict or (label, l, r, head)."""
    if depth > 60:
        raise RecursionError
    if symbol in TOY_WORDS:
        words = TOY_WORDS[symbol]
        return [(symbol, words[int(rng.integers(len(words)))])], None
    probs, rules = zip(*[(p, (rhs, head)) for p, rhs, head in TOY_RULES[symbol]])
    rhs, head = rules[int(rng.choice(len(rules), p=np.asarray(probs)))]
    if len(rhs) == 1:
        return _expand_symbol(rhs[0], rng, depth + 1)
    left_tokens, left_node = _expand_symbol(rhs[0], rng, depth + 1)
    right_tokens, right_node = _expand_symbol(rhs[1], rng, depth + 1)
    tokens = left_tokens + right_tokens
    node = (symbol, (len(left_tokens), left_node, right_node), head)
    return tokens, node


def _materialize_tree(node, spans, arcs, offset=0):
    """Index tree, labeled spans and head arcs for a rule node; leaves are
    None.  Returns (tree, head_index, width)."""
    if node is None:
        return offset, offset, 1
    label, (split, left, right), head_side = node
    lt, lh, lw = _materialize_tree(left, spans, arcs, offset)
    rt, rh, rw = _materialize_tree(right, spans, arcs, offset + split)
    width = lw + rw
    spans.append((label, offset, offset + width - 1))
    if head_side == 0:
        parent, child = lh, rh
    else:
        parent, child = rh, lh
    arcs.append((child, parent))
    return (lt, rt), parent, width


def toy_grammar_generate(seed, size, min_len=4, max_len=20) -> list:
    """Sample `size` sentences with gold binary trees and dependencies;
    deterministic for a given seed."""
    rng = np.random.default_rng([seed, 0x70f])
    out = []
    while len(out) < size:
        try:
            tokens_tagged, node = _expand_symbol("S", rng, 0)
        except RecursionError:
            continue
        if not min_len <= len(tokens_tagged) <= max_len:
            continue
        tokens = [w for _, w in tokens_tagged]
        spans, arcs = [], []
        tree, _root, width = _materialize_tree(node, spans, arcs)
        assert width == len(tokens)
        parents = [-1] * len(tokens)
        for child, parent in arcs:
            parents[child] = parent
        out.append(ToySentence(
            tokens=tokens, tree=tree, labeled_spans=spans, parents=parents,
            bracketed=_render_bracketed(node, tokens_tagged)))
    return out


def _render_bracketed(node, tokens_tagged, offset=0):
    if node is None:
        tag, word = tokens_tagged[offset]
        return f"({tag} {word})"
    label, (split, left, right), _ = node
    left_s = _render_bracketed(left, tokens_tagged, offset)
    right_s = _render_bracketed(right, tokens_tagged, offset + split)
    return f"({label} {left_s} {right_s})"


def write_raw(path, sentences):
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(" ".join(s.tokens) + "\n")


def write_bracketed(path, sentences):
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(s.bracketed + "\n")
