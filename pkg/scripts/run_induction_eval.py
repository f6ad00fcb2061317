#!/usr/bin/env python3
"""Grammar-induction quality of trained checkpoints on the held-out test
split, against seeded random baselines (random binary trees for UF1,
uniform random parents for UUAS)."""

import argparse
import json
from pathlib import Path

import numpy as np

from structlab.experiments import induction_report, toy_datasets


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--checkpoints", nargs="+", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--corpus-seed", type=int, default=0)
    args = ap.parse_args()

    _, _, test = toy_datasets(args.corpus_seed)
    rows = []
    for path in args.checkpoints:
        rep = induction_report(path, test)
        rows.append({"checkpoint": path, **rep})
        print(f"== {path}")
        for key in ("uf1", "random_uf1", "uas", "uuas", "random_uuas"):
            print(f"  {key}: {rep[key]:.2f}")
    summary = {"checkpoints": rows}
    for key in ("uf1", "uuas", "random_uf1", "random_uuas"):
        vals = [r[key] for r in rows]
        summary[key] = {"mean": float(np.mean(vals)), "stddev": float(np.std(vals))}
    print(f"mean UF1 {summary['uf1']['mean']:.2f} vs random "
          f"{summary['random_uf1']['mean']:.2f}; mean UUAS "
          f"{summary['uuas']['mean']:.2f} vs random "
          f"{summary['random_uuas']['mean']:.2f}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
