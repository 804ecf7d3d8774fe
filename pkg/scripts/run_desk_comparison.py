#!/usr/bin/env python3
"""Desk-scale comparison of training modes on the tiny MLP family.

Trains a vanilla fixed-horizon optimizer and the curriculum+imitation
variant, evaluates both against the analytical baselines at a long
horizon, and writes all artifacts (checkpoints, per-epoch CSVs, eval
reports, comparison table) under --out. Takes a couple of minutes on one
CPU core.
"""

import argparse
import os
import sys

from l2okit.cli import main as cli_main


def run(argv):
    code = cli_main(argv)
    if code != 0:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--n-eval", type=int, default=500)
    args = ap.parse_args()

    base = args.out
    seed = str(args.seed)
    n_eval = str(args.n_eval)

    run(["train", "--mode", "vanilla", "--family", "tiny_mlp",
         "--seed", seed, "--out", os.path.join(base, "train-vanilla")])
    run(["train", "--mode", "cl-il", "--family", "tiny_mlp",
         "--ladder", "20,40,100", "--n-period", "3", "--t-period", "25",
         "--epochs", "600", "--seed", seed,
         "--out", os.path.join(base, "train-cl-il")])

    evals = []
    for name in ("vanilla", "cl-il"):
        out = os.path.join(base, f"eval-{name}")
        run(["eval", "--family", "tiny_mlp", "--n-eval", n_eval,
             "--checkpoint", os.path.join(base, f"train-{name}", "checkpoint.l2o"),
             "--name", name, "--out", out])
        evals.append(os.path.join(out, "report.json"))
    for opt in ("adam", "sgd"):
        out = os.path.join(base, f"eval-{opt}")
        run(["eval", "--family", "tiny_mlp", "--n-eval", n_eval,
             "--optimizer", opt, "--out", out])
        evals.append(os.path.join(out, "report.json"))

    run(["compare", *evals,
         "--table-out", os.path.join(base, "comparison.csv")])
    print(f"done; table at {os.path.join(base, 'comparison.csv')}")


if __name__ == "__main__":
    main()
