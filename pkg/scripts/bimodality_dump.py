#!/usr/bin/env python3
"""Dump predictive vs ground-truth dy samples near the waterfall.

Trains (or loads) a Wet-Chicken model and writes predictive-dump CSVs for a
row of states approaching the waterfall, where the transition distribution
becomes increasingly bimodal.
"""

import argparse
import os
import sys

from alphabnn import cli


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--checkpoint", help="existing model; trained if omitted")
    p.add_argument("--method", default="alpha", choices=["alpha", "vb", "mlp"])
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--out-dir", default="runs/bimodality")
    args = p.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    ckpt = args.checkpoint
    if not ckpt:
        data = os.path.join(args.out_dir, f"train_seed{args.seed}.csv")
        ckpt = os.path.join(args.out_dir, f"model_seed{args.seed}.ckpt")
        for argv in (
            ["gen-data", "wet-chicken-trajectory", "2500",
             "--seed", str(args.seed), "--out", data],
            ["train-model", "--data", data, "--out", ckpt,
             "--method", args.method, "--alpha", str(args.alpha),
             "--seed", str(args.seed)],
        ):
            rc = cli.main(argv)
            if rc != 0:
                return rc

    for y in (1.5, 2.5, 3.5, 4.5):
        out = os.path.join(args.out_dir, f"dy_at_y{y:g}.csv")
        rc = cli.main(["predictive-dump", "--checkpoint", ckpt,
                       "--x", "2.5", "--y", str(y), "--ax", "0",
                       "--ay", "0.5", "--samples", str(args.samples),
                       "--seed", str(args.seed), "--out", out])
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
