"""Command line entry points wiring the library into reproducible runs.

Subcommands: train, parse, eval, inspect.  Options may come from a flat
key=value config file (--config); explicit command line flags win over the
file, the file wins over defaults, and unknown keys are rejected.  Every
run writes its resolved configuration next to its outputs so it can be
reproduced from that file plus the seed.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
The environment variable STRUCTLAB_THREADS caps worker-process parallelism
in the experiment scripts; library calls themselves are single-threaded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_model, save_model
from .corpus import (
    MASK_ID,
    Vocab,
    build_vocab,
    read_bracketed,
    read_conll,
    read_raw,
)
from .dependency import decode_parents_rooted, row_entropy
from .errors import DataError, NumericalError, UsageError
from .evaluation import ParseEvalReport, attachment_scores, label_recall, unlabeled_f1
from .model import ModelConfig, StructuredTransformer
from .structures import distance_to_tree, tree_spans, tree_to_bracketed
from .training import evaluate_ppl, train


def thread_cap(default=1):
    """Worker cap from STRUCTLAB_THREADS (scripts use this for process
    pools); defaults to 1."""
    raw = os.environ.get("STRUCTLAB_THREADS", "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        raise UsageError(f"STRUCTLAB_THREADS must be an integer, got {raw!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


MODEL_KEYS = ("layers", "d_model", "heads", "d_ff", "dropout", "parser_layers",
              "kernel_width", "parser_hidden", "mask_rate", "relations",
              "attention", "train_max_len", "eval_max_len", "precision", "seed")


def _add_model_flags(p):
    p.add_argument("--layers", type=int)
    p.add_argument("--d-model", type=int, dest="d_model")
    p.add_argument("--heads", type=int)
    p.add_argument("--d-ff", type=int, dest="d_ff")
    p.add_argument("--dropout", type=float)
    p.add_argument("--parser-layers", type=int, dest="parser_layers")
    p.add_argument("--kernel-width", type=int, dest="kernel_width")
    p.add_argument("--parser-hidden", type=int, dest="parser_hidden")
    p.add_argument("--mask-rate", type=float, dest="mask_rate")
    p.add_argument("--relations", choices=["parent+dep", "parent", "dep"])
    p.add_argument("--calibrate", choices=["on", "off"])
    p.add_argument("--attention", choices=["structured", "softmax"])
    p.add_argument("--train-max-len", type=int, dest="train_max_len")
    p.add_argument("--eval-max-len", type=int, dest="eval_max_len")
    p.add_argument("--precision", choices=["float32", "float64"])
    p.add_argument("--seed", type=int)


def build_parser():
    top = _Parser(prog="structlab", description=__doc__,
                  formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = top.add_subparsers(dest="command", required=True)

    pt = sub.add_parser("train", help="train a model on a raw corpus")
    pt.add_argument("--config")
    pt.add_argument("--corpus", required=True)
    pt.add_argument("--out", required=True)
    pt.add_argument("--min-freq", type=int, dest="min_freq")
    pt.add_argument("--steps", type=int)
    pt.add_argument("--batch-size", type=int, dest="batch_size")
    pt.add_argument("--lr", type=float)
    pt.add_argument("--warmup", type=int)
    pt.add_argument("--clip", type=float)
    pt.add_argument("--log-every", type=int, dest="log_every")
    _add_model_flags(pt)

    pp = sub.add_parser("parse", help="parse raw sentences with a checkpoint")
    pp.add_argument("--config")
    pp.add_argument("--checkpoint", required=True)
    pp.add_argument("--sentences", required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--dump-structures", action="store_true",
                    dest="dump_structures")

    pe = sub.add_parser("eval", help="evaluate checkpoints against gold data")
    pe.add_argument("--config")
    pe.add_argument("--checkpoints", nargs="+", required=True)
    pe.add_argument("--corpus", help="raw text for masked perplexity")
    pe.add_argument("--gold-trees", dest="gold_trees")
    pe.add_argument("--gold-deps-stanford", dest="gold_deps_stanford")
    pe.add_argument("--gold-deps-conll", dest="gold_deps_conll")
    pe.add_argument("--mask-seed", type=int, dest="mask_seed")
    pe.add_argument("--out", required=True)

    pi = sub.add_parser("inspect", help="dump induced structures as JSON lines")
    pi.add_argument("--config")
    pi.add_argument("--checkpoint", required=True)
    pi.add_argument("--sentences", required=True)
    pi.add_argument("--out", required=True)
    return top


TRAIN_DEFAULTS = {"min_freq": 1, "steps": 5000, "batch_size": 32, "lr": 1e-3,
                  "warmup": 1000, "clip": 1.0, "log_every": 50}
MODEL_DEFAULTS = {k: getattr(ModelConfig(vocab_size=1), k) for k in MODEL_KEYS}
MODEL_DEFAULTS["calibrate"] = "on"
EVAL_DEFAULTS = {"mask_seed": 1234}
PARSE_DEFAULTS = {"dump_structures": False}


def read_config_file(path, known):
    values = {}
    for lineno, line in enumerate(open(path, encoding="utf-8"), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = val
    return values


def _coerce(value, like):
    if isinstance(like, bool):
        return value in ("1", "true", "on", "yes", "True")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def resolve_options(args, defaults):
    """defaults < config file < explicit flags; returns a plain dict."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        file_vals = read_config_file(args.config, set(defaults))
        for key, raw in file_vals.items():
            resolved[key] = _coerce(raw, defaults[key])
    for key in defaults:
        cli_val = getattr(args, key, None)
        if cli_val is not None and key != "dump_structures":
            resolved[key] = cli_val
        if key == "dump_structures" and getattr(args, key, False):
            resolved[key] = True
    return resolved


def write_resolved(out_dir, command, resolved, extra=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "resolved.cfg", "w", encoding="utf-8") as fh:
        fh.write(f"command = {command}\n")
        for key in sorted(resolved):
            fh.write(f"{key} = {resolved[key]}\n")
        for key in sorted(extra or {}):
            fh.write(f"{key} = {extra[key]}\n")


# ---------------------------------------------------------------------------
# commands


def cmd_train(args):
    opts = resolve_options(args, {**TRAIN_DEFAULTS, **MODEL_DEFAULTS})
    sentences = read_raw(args.corpus)
    if not sentences:
        raise DataError(f"{args.corpus}: no sentences")
    vocab = build_vocab(sentences, min_freq=opts["min_freq"])
    corpus = [vocab.encode(s) for s in sentences]
    cfg_kwargs = {k: opts[k] for k in MODEL_KEYS}
    cfg_kwargs["calibrate"] = opts["calibrate"] == "on"
    config = ModelConfig(vocab_size=len(vocab), **cfg_kwargs)
    model = StructuredTransformer(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved(out, "train", opts, {"corpus": args.corpus,
                                        "vocab_size": len(vocab)})
    vocab.save(out / "vocab.txt")
    base = StructuredTransformer(ModelConfig(vocab_size=len(vocab), **{
        **cfg_kwargs, "attention": "softmax"}))
    print(f"parameters: {model.parameter_count()} "
          f"(matched softmax baseline: {base.parameter_count()})")
    history = train(model, corpus, steps=opts["steps"],
                    batch_size=opts["batch_size"], lr=opts["lr"],
                    warmup=opts["warmup"], clip=opts["clip"], mask_id=MASK_ID,
                    log_every=opts["log_every"],
                    log_path=str(out / "metrics.jsonl"))
    save_model(out / "checkpoint.ckpt", model, vocab_tokens=vocab.tokens)
    final_ppl = float(np.exp(np.mean([h["loss"] for h in history[-20:]])))
    print(f"final training ppl (last 20 steps): {final_ppl:.3f}")
    print(f"checkpoint: {out / 'checkpoint.ckpt'}")
    return 0


def _load_for_inference(path):
    model, vocab_tokens = load_model(path)
    if vocab_tokens is None:
        raise DataError(f"{path}: checkpoint carries no vocabulary")
    return model, Vocab(vocab_tokens)


def parse_tokens(model, vocab, tokens):
    """Tree, rooted parents and structures for one token list."""
    if not model.structured:
        raise DataError("checkpoint was trained with softmax attention and "
                        "induces no structures; only perplexity evaluation "
                        "is available")
    ids = np.asarray([vocab.encode(tokens)])
    out = model.forward(ids)
    tau = out.tau.data[0]
    delta = out.delta.data[0]
    tree = distance_to_tree(tokens, tau) if len(tokens) > 1 else 0
    parents = decode_parents_rooted(out.parent.data[0], delta)
    return tree, parents, tau, delta, out.parent.data[0]


def cmd_parse(args):
    opts = resolve_options(args, dict(PARSE_DEFAULTS))
    model, vocab = _load_for_inference(args.checkpoint)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_resolved(out_path.parent, "parse",
                   {**opts, "checkpoint": args.checkpoint,
                    "sentences": args.sentences})
    n_done = 0
    with open(args.sentences, encoding="utf-8") as fh, \
            open(out_path, "w", encoding="utf-8") as out:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                print(f"warning: line {lineno} is empty, skipped", file=sys.stderr)
                continue
            tree, parents, tau, delta, _ = parse_tokens(model, vocab, tokens)
            record = {
                "tokens": tokens,
                "tree": tree_to_bracketed(tree, tokens),
                "parents": ["ROOT" if p < 0 else tokens[p] for p in parents],
                "parent_ids": [int(p) for p in parents],
            }
            if opts["dump_structures"]:
                record["tau"] = [float(t) for t in tau]
                record["delta"] = [float(d) for d in delta]
            out.write(json.dumps(record) + "\n")
            n_done += 1
    print(f"parsed {n_done} sentences -> {out_path}")
    return 0


def _predict_spans(model, vocab, gold_sentences):
    pred, gold_pairs = [], []
    for sent in gold_sentences:
        toks = sent.stripped_tokens
        if not toks:
            continue
        tree, _, _, _, _ = parse_tokens(model, vocab, toks)
        pred.append((toks, tree_spans(tree) if len(toks) > 1 else set()))
        gold_pairs.append((toks, sent.spans))
    return pred, gold_pairs


def _predict_parents(model, vocab, gold_sentences):
    """Predicted parents mapped back to original token indices."""
    preds, golds, puncts = [], [], []
    for sent in gold_sentences:
        keep = [i for i, p in enumerate(sent.punct) if not p]
        toks = [sent.tokens[i] for i in keep]
        pred_orig = [-2] * len(sent.tokens)
        if toks:
            _, parents, _, _, _ = parse_tokens(model, vocab, toks)
            for stripped_i, par in enumerate(parents):
                pred_orig[keep[stripped_i]] = keep[par] if par >= 0 else -1
        preds.append(pred_orig)
        golds.append(sent.parents)
        puncts.append(sent.punct)
    return preds, golds, puncts


def evaluate_checkpoint(model, vocab, corpus_path=None, gold_trees=None,
                        gold_deps=None, mask_seed=1234):
    """One checkpoint's ParseEvalReport (+ per-scheme attachment scores)."""
    report = ParseEvalReport()
    dep_scores = {}
    if gold_trees:
        pred, gold_pairs = _predict_spans(model, vocab, gold_trees)
        report.uf1, report.precision, report.recall = unlabeled_f1(pred, gold_pairs)
        report.sentences = len(pred)
        report.tokens = sum(len(t) for t, _ in pred)
        labels = sorted({lab for s in gold_trees for lab, _, _ in
                         (s.labeled_spans or [])})
        for lab in labels:
            rec = label_recall([spans for _, spans in pred],
                               [s.labeled_spans or [] for s in gold_trees], lab)
            if rec is not None:
                report.label_recall[lab] = rec
    for scheme, sentences in (gold_deps or {}).items():
        preds, golds, puncts = _predict_parents(model, vocab, sentences)
        dep_scores[scheme] = attachment_scores(preds, golds, puncts)
    if dep_scores:
        first = sorted(dep_scores)[0]
        report.uas, report.uuas = dep_scores[first]
    if corpus_path:
        sentences = read_raw(corpus_path)
        cap = model.config.eval_max_len
        usable = [vocab.encode(s) for s in sentences if len(s) <= cap]
        if len(usable) < len(sentences):
            print(f"warning: skipped {len(sentences) - len(usable)} sentences "
                  f"over the length cap {cap}", file=sys.stderr)
        report.ppl = evaluate_ppl(model, usable, mask_id=MASK_ID, seed=mask_seed)
        if not report.sentences:
            report.sentences = len(usable)
            report.tokens = sum(len(s) for s in usable)
    return report, dep_scores


def cmd_eval(args):
    opts = resolve_options(args, dict(EVAL_DEFAULTS))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gold_trees = read_bracketed(args.gold_trees) if args.gold_trees else None
    gold_deps = {}
    if args.gold_deps_stanford:
        gold_deps["stanford"] = read_conll(args.gold_deps_stanford)
    if args.gold_deps_conll:
        gold_deps["conll"] = read_conll(args.gold_deps_conll)
    write_resolved(out, "eval", {**opts, "checkpoints": " ".join(args.checkpoints),
                                 "corpus": args.corpus or "",
                                 "gold_trees": args.gold_trees or "",
                                 "gold_deps_stanford": args.gold_deps_stanford or "",
                                 "gold_deps_conll": args.gold_deps_conll or ""})
    rows = []
    for path in args.checkpoints:
        model, vocab = _load_for_inference(path)
        report, dep_scores = evaluate_checkpoint(
            model, vocab, corpus_path=args.corpus, gold_trees=gold_trees,
            gold_deps=gold_deps, mask_seed=opts["mask_seed"])
        rows.append({"checkpoint": str(path), "report": report.__dict__,
                     "attachment": {k: {"uas": v[0], "uuas": v[1]}
                                    for k, v in dep_scores.items()}})
        print(f"== {path}")
        print(report.to_table())
    summary = {"checkpoints": rows}
    if len(rows) > 1:
        agg = {}
        keys = ["uf1", "precision", "recall", "uas", "uuas", "ppl"]
        for key in keys:
            vals = [r["report"][key] for r in rows if r["report"][key] is not None]
            if vals:
                agg[key] = {"mean": float(np.mean(vals)),
                            "stddev": float(np.std(vals))}
        summary["aggregate"] = agg
        print("== aggregate over checkpoints")
        for key, v in agg.items():
            print(f"{key}: {v['mean']:.2f} ({v['stddev']:.2f})")
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(f"== {row['checkpoint']}\n")
            fh.write(ParseEvalReport(**row["report"]).to_table() + "\n")
    return 0


def cmd_inspect(args):
    model, vocab = _load_for_inference(args.checkpoint)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    mu1, mu2 = model.temperatures()
    header = {
        "relation_weights": model.relation_summary(),
        "layers": model.config.layers,
        "heads": model.config.heads,
        "mu1": float(mu1.data),
        "mu2": float(mu2.data),
    }
    n_done = 0
    with open(args.sentences, encoding="utf-8") as fh, \
            open(out_path, "w", encoding="utf-8") as out:
        out.write(json.dumps(header) + "\n")
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                print(f"warning: line {lineno} is empty, skipped", file=sys.stderr)
                continue
            _, parents, tau, delta, parent_matrix = parse_tokens(model, vocab, tokens)
            out.write(json.dumps({
                "tokens": tokens,
                "tau": [float(t) for t in tau],
                "delta": [float(d) for d in delta],
                "parent_matrix": [float(x) for x in parent_matrix.reshape(-1)],
                "decoded_parents": [int(p) for p in parents],
                "row_entropy": [float(h) for h in row_entropy(parent_matrix)],
            }) + "\n")
            n_done += 1
    print(f"inspected {n_done} sentences -> {out_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"train": cmd_train, "parse": cmd_parse,
                   "eval": cmd_eval, "inspect": cmd_inspect}[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
