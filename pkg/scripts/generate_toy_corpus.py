#!/usr/bin/env python3
"""Write the built-in grammar corpus to disk: raw text, gold bracketed
trees, and gold dependencies (CoNLL), split into train/valid/test."""

import argparse
from pathlib import Path

from structlab.corpus import write_bracketed, write_conll, write_raw
from structlab.experiments import toy_datasets


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--train-size", type=int, default=5000)
    ap.add_argument("--valid-size", type=int, default=500)
    ap.add_argument("--test-size", type=int, default=500)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    splits = toy_datasets(args.seed, args.train_size, args.valid_size,
                          args.test_size)
    for name, sents in zip(("train", "valid", "test"), splits):
        write_raw(out / f"{name}.txt", sents)
        write_bracketed(out / f"{name}.trees", sents)
        write_conll(out / f"{name}.conll", sents)
        print(f"{name}: {len(sents)} sentences")


if __name__ == "__main__":
    main()
