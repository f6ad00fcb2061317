"""Paired desk-scale experiments on the built-in grammar.

One arm trains the structure-constrained encoder, the other a matched
softmax-attention baseline (identical everything else); both see the same
corpus, steps and masking rate.  Masked perplexity is compared on a held-out
split, and the induced trees/dependencies are scored against the grammar's
own gold structures and against seeded trivial baselines.

Runs are deterministic per (mode, seed) and independent across seeds, so
they can execute in parallel worker processes; STRUCTLAB_THREADS caps that
pool in the scripts.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .checkpoint import load_model, save_model
from .corpus import MASK_ID, build_vocab, toy_grammar_generate
from .dependency import decode_parents_rooted
from .evaluation import attachment_scores, baselines, random_parents, unlabeled_f1
from .model import ModelConfig, StructuredTransformer
from .structures import distance_to_tree, tree_spans
from .training import evaluate_ppl, train

TOY_MODEL = dict(layers=2, d_model=128, heads=8, d_ff=512, dropout=0.1,
                 parser_layers=3, kernel_width=3, parser_hidden=128,
                 mask_rate=0.3, train_max_len=24, eval_max_len=24,
                 precision="float32")
TOY_TRAIN = dict(steps=5000, batch_size=32, lr=1e-3, warmup=1000, clip=1.0)


def toy_datasets(corpus_seed=0, train_size=5000, valid_size=500, test_size=500):
    """Disjoint train/valid/test splits of the built-in grammar corpus."""
    sents = toy_grammar_generate(corpus_seed, train_size + valid_size + test_size)
    return (sents[:train_size],
            sents[train_size:train_size + valid_size],
            sents[train_size + valid_size:])


def run_toy_training(mode, seed, train_sents, valid_sents, out_path=None,
                     steps=None, log_path=None):
    """Train one arm; returns {mode, seed, ppl, checkpoint}."""
    vocab = build_vocab([s.tokens for s in train_sents])
    corpus = [vocab.encode(s.tokens) for s in train_sents]
    cfg = ModelConfig(vocab_size=len(vocab), attention=mode, seed=seed,
                      **TOY_MODEL)
    model = StructuredTransformer(cfg)
    opts = dict(TOY_TRAIN)
    if steps is not None:
        opts["steps"] = steps
    train(model, corpus, mask_id=MASK_ID, log_path=log_path, **opts)
    valid = [vocab.encode(s.tokens) for s in valid_sents]
    ppl = evaluate_ppl(model, valid, mask_id=MASK_ID, seed=1234)
    if out_path is not None:
        save_model(out_path, model, vocab_tokens=vocab.tokens)
    return {"mode": mode, "seed": seed, "ppl": ppl,
            "checkpoint": str(out_path) if out_path else None}


def _worker(job):
    mode, seed, corpus_seed, sizes, steps, out_dir = job
    train_sents, valid_sents, _ = toy_datasets(corpus_seed, *sizes)
    out_path = os.path.join(out_dir, f"{mode}_seed{seed}.ckpt") if out_dir else None
    log_path = os.path.join(out_dir, f"{mode}_seed{seed}.jsonl") if out_dir else None
    return run_toy_training(mode, seed, train_sents, valid_sents,
                            out_path=out_path, steps=steps, log_path=log_path)


def run_paired(seeds, out_dir, corpus_seed=0,
               sizes=(5000, 500, 500), steps=None, workers=1):
    """All (mode, seed) runs, optionally in parallel processes; returns the
    per-run records sorted by (mode, seed)."""
    jobs = [(mode, seed, corpus_seed, sizes, steps, out_dir)
            for mode in ("structured", "softmax") for seed in seeds]
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]
    return sorted(results, key=lambda r: (r["mode"], r["seed"]))


def parse_test_sentences(model, vocab, sentences):
    """Predicted (tokens, spans) pairs and rooted parent lists."""
    spans, parents = [], []
    for s in sentences:
        ids = np.asarray([vocab.encode(s.tokens)])
        out = model.forward(ids)
        tree = distance_to_tree(s.tokens, out.tau.data[0])
        spans.append((s.tokens, tree_spans(tree)))
        parents.append(decode_parents_rooted(out.parent.data[0],
                                             out.delta.data[0]).tolist())
    return spans, parents


def induction_report(checkpoint_path, test_sents, baseline_seed=0):
    """Induced UF1/UAS/UUAS on the test split, next to the seeded random
    baselines (random binary trees; uniform random parents)."""
    from .corpus import Vocab

    model, vocab_tokens = load_model(checkpoint_path)
    vocab = Vocab(vocab_tokens)
    pred_spans, pred_parents = parse_test_sentences(model, vocab, test_sents)
    gold_pairs = [(s.tokens, s.spans) for s in test_sents]
    uf1, precision, recall = unlabeled_f1(pred_spans, gold_pairs)
    uas, uuas = attachment_scores(pred_parents,
                                  [s.parents for s in test_sents])

    rng = np.random.default_rng([baseline_seed, 0xabc])
    rand_trees = baselines([s.tokens for s in test_sents], "random",
                           seed=baseline_seed)
    rand_spans = [(s.tokens, tree_spans(t)) for s, t in zip(test_sents, rand_trees)]
    rand_uf1, _, _ = unlabeled_f1(rand_spans, gold_pairs)
    rand_parents = [random_parents(len(s.tokens), rng) for s in test_sents]
    _, rand_uuas = attachment_scores(rand_parents,
                                     [s.parents for s in test_sents])
    return {"uf1": uf1, "precision": precision, "recall": recall,
            "uas": uas, "uuas": uuas,
            "random_uf1": rand_uf1, "random_uuas": rand_uuas}
