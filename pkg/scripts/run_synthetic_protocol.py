#!/usr/bin/env python3
"""End-to-end desk-scale run: synthetic data through the full protocol.

Generates a labeled corpus, trains the five fold models with the published
default parameters, evaluates them, scores the corpus as if blind with the
fold-weighted ensemble, runs the genetic hyperparameter search on fold 1,
and projects the prepared features to 2-D. Everything lands under --out.
"""

import argparse
import json
import sys
from pathlib import Path

from coughscreen.cli import main as cli


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/synthetic")
    parser.add_argument("--n", type=int, default=1000)
    parser.add_argument("--dim", type=int, default=20)
    parser.add_argument("--separation", type=float, default=6.0)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--skip-search", action="store_true")
    parser.add_argument("--skip-project", action="store_true")
    args = parser.parse_args(argv)

    out = Path(args.out)
    data = out / "data"
    seed = str(args.seed)

    steps = [
        ["synth", "--n", str(args.n), "--dim", str(args.dim),
         "--imbalance", "0.1", "--separation", str(args.separation),
         "--seed", seed, "--out", str(data)],
        ["train", "--manifest", str(data / "manifest.json"),
         "--folds", str(data / "folds"), "--seed", seed,
         "--out", str(out / "train")],
        ["eval", "--manifest", str(data / "manifest.json"),
         "--folds", str(data / "folds"),
         "--models", str(out / "train" / "models"),
         "--out", str(out / "eval")],
        ["score", "--manifest", str(data / "manifest.json"),
         "--models", str(out / "train" / "models"),
         "--results", str(out / "train" / "results.json"),
         "--out", str(out / "ensemble")],
    ]
    if not args.skip_search:
        steps.append(["search", "--manifest", str(data / "manifest.json"),
                      "--folds", str(data / "folds"), "--fold", "1",
                      "--seed", seed, "--out", str(out / "search")])
    if not args.skip_project:
        steps.append(["project", "--manifest", str(data / "manifest.json"),
                      "--perplexity", "30", "--seed", seed,
                      "--out", str(out / "projection")])

    for step in steps:
        print(f"== coughscreen {' '.join(step[:1])}", flush=True)
        code = cli(step)
        if code != 0:
            return code

    results = json.loads((out / "eval" / "results.json").read_text())
    print("\nfold results:")
    for fold in results["folds"]:
        print(f"  fold {fold['fold']}: AUC {fold['auc']:.2f}%  "
              f"specificity@80 {fold['specificity']:.2f}%")
    avg = results["average"]
    print(f"  average: AUC {avg['auc']:.2f}%  specificity {avg['specificity']:.2f}%")
    return 0


if __name__ == "__main__":
    sys.exit(run())
