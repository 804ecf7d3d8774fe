#!/usr/bin/env python3
"""Train the self-improving baseline (mixed L2O/analytical trajectories,
teacher probabilities annealed to zero) and evaluate it next to a plain
vanilla run on the same seed."""

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
    ap.add_argument("--out", default="runs/self-improving")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--family", default="tiny_mlp")
    args = ap.parse_args()

    base, seed = args.out, str(args.seed)
    reports = []
    for mode in ("self-improving", "vanilla"):
        train_out = os.path.join(base, f"train-{mode}")
        run(["train", "--mode", mode, "--family", args.family,
             "--seed", seed, "--out", train_out])
        eval_out = os.path.join(base, f"eval-{mode}")
        run(["eval", "--family", args.family,
             "--checkpoint", os.path.join(train_out, "checkpoint.l2o"),
             "--name", mode, "--out", eval_out])
        reports.append(os.path.join(eval_out, "report.json"))

    run(["compare", *reports,
         "--table-out", os.path.join(base, "comparison.csv")])


if __name__ == "__main__":
    main()
