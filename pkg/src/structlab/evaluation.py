"""Unsupervised parsing metrics and trivial baselines.

Span F1 is micro-averaged over the corpus; single-word spans never count,
the whole-sentence span does.  Attachment scores are arc-based over the
n-1 gold arcs whose endpoints are both non-punctuation: UAS is the
fraction of those arcs predicted with the right direction (a -1 "root"
prediction earns no credit), UUAS the fraction recovered ignoring
direction.  Both share the denominator and every directed match is an
undirected match, so UUAS >= UAS holds as a theorem, identical parses
score 100/100, and the root choice costs at most the root's own arc.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError


@dataclass
class ParseEvalReport:
    uf1: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    label_recall: dict = field(default_factory=dict)
    uas: Optional[float] = None
    uuas: Optional[float] = None
    sentences: int = 0
    tokens: int = 0
    ppl: Optional[float] = None

    def to_json(self):
        return json.dumps(self.__dict__, sort_keys=True, indent=2)

    def to_table(self):
        rows = [("sentences", f"{self.sentences}"),
                ("tokens", f"{self.tokens}"),
                ("UF1", f"{self.uf1:.2f}"),
                ("precision", f"{self.precision:.2f}"),
                ("recall", f"{self.recall:.2f}")]
        for label in sorted(self.label_recall):
            rows.append((f"recall[{label}]", f"{self.label_recall[label]:.2f}"))
        if self.uas is not None:
            rows.append(("UAS", f"{self.uas:.2f}"))
        if self.uuas is not None:
            rows.append(("UUAS", f"{self.uuas:.2f}"))
        if self.ppl is not None:
            rows.append(("masked PPL", f"{self.ppl:.3f}"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def unlabeled_f1(predicted, gold):
    """Micro-averaged span precision/recall/F1.

    Both arguments are sequences of (tokens, span_set) pairs over identical
    punctuation-stripped token sequences; mismatched tokens fail loudly.
    Returns (f1, precision, recall) in percent.
    """
    if len(predicted) != len(gold):
        raise DataError(f"unlabeled_f1: {len(predicted)} predictions vs "
                        f"{len(gold)} gold sentences")
    match = n_pred = n_gold = 0
    for i, ((ptoks, pspans), (gtoks, gspans)) in enumerate(zip(predicted, gold)):
        if list(ptoks) != list(gtoks):
            raise DataError(f"unlabeled_f1: sentence {i}: tokens differ "
                            f"({' '.join(ptoks)!r} vs {' '.join(gtoks)!r})")
        pset, gset = set(pspans), set(gspans)
        match += len(pset & gset)
        n_pred += len(pset)
        n_gold += len(gset)
    precision = 100.0 * match / n_pred if n_pred else 0.0
    recall = 100.0 * match / n_gold if n_gold else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return f1, precision, recall


def label_recall(predicted_spans, gold_labeled_spans, label):
    """Fraction (percent) of gold spans carrying `label` whose boundaries
    appear in the prediction; None when the label never occurs."""
    hit = total = 0
    for pspans, glabeled in zip(predicted_spans, gold_labeled_spans):
        pset = set(pspans)
        for glabel, s, e in glabeled:
            if glabel != label:
                continue
            total += 1
            hit += int((s, e) in pset)
    if total == 0:
        return None
    return 100.0 * hit / total


def attachment_counts(pred_parents, gold_parents, punct):
    """Per-sentence counts: (directed matches, recovered undirected arcs,
    scored gold arcs)."""
    if len(pred_parents) != len(gold_parents):
        raise DataError(f"attachment: {len(pred_parents)} predicted vs "
                        f"{len(gold_parents)} gold tokens")
    n = len(gold_parents)
    punct = list(punct) if punct is not None else [False] * n
    keep = [not punct[i] for i in range(n)]

    def edges(parents):
        out = set()
        for i, p in enumerate(parents):
            if p >= 0 and keep[i] and keep[p]:
                out.add((min(i, p), max(i, p)))
        return out

    directed = scored = 0
    for i in range(n):
        g = gold_parents[i]
        if g >= 0 and keep[i] and keep[g]:
            scored += 1
            directed += int(pred_parents[i] == g)
    undirected = len(edges(gold_parents) & edges(pred_parents))
    return directed, undirected, scored


def attachment_scores(pred_parents, gold_parents, punct=None):
    """Corpus-level (UAS, UUAS) in percent; accepts single sentences (flat
    lists) or corpora (lists of per-sentence lists)."""
    if pred_parents and np.isscalar(pred_parents[0]):
        pred_parents, gold_parents = [pred_parents], [gold_parents]
        punct = [punct] if punct is not None else None
    d = u = a = 0
    for i, (pp, gp) in enumerate(zip(pred_parents, gold_parents)):
        pu = punct[i] if punct is not None else None
        di, ui, ai = attachment_counts(pp, gp, pu)
        d, u, a = d + di, u + ui, a + ai
    uas = 100.0 * d / a if a else 0.0
    uuas = 100.0 * u / a if a else 0.0
    return uas, uuas


# ---------------------------------------------------------------------------
# baselines


def right_branching(n):
    tree = n - 1
    for i in range(n - 2, -1, -1):
        tree = (i, tree)
    return tree


def left_branching(n):
    tree = 0
    for i in range(1, n):
        tree = (tree, i)
    return tree


def random_tree(n, rng):
    def build(lo, hi):
        if hi - lo == 1:
            return lo
        k = int(rng.integers(lo, hi - 1))
        return (build(lo, k + 1), build(k + 1, hi))
    return build(0, n)


def baselines(sentences, kind, seed=0):
    """Predicted trees for each token sequence; kind in
    {random, left, right}."""
    rng = np.random.default_rng([seed, 0xba5e])
    out = []
    for toks in sentences:
        n = len(toks)
        if kind == "right":
            out.append(right_branching(n))
        elif kind == "left":
            out.append(left_branching(n))
        elif kind == "random":
            out.append(random_tree(n, rng))
        else:
            raise DataError(f"unknown baseline kind {kind!r}")
    return out


def random_parents(n, rng):
    """Uniform random parent per token with a random root (marked -1)."""
    parents = np.zeros(n, dtype=int)
    for i in range(n):
        choices = [j for j in range(n) if j != i]
        parents[i] = choices[int(rng.integers(len(choices)))] if choices else -1
    parents[int(rng.integers(n))] = -1
    return parents.tolist()
