#!/usr/bin/env python3
"""Full Wet-Chicken pipeline for one method and seed.

Generates transition data, trains the model, evaluates it on a held-out
trajectory, trains a policy by roll-out gradients, and evaluates the policy
on the true dynamics.  Everything goes through the CLI so each stage leaves
a manifest in the output directory.
"""

import argparse
import os
import sys

from alphabnn import cli


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--method", default="alpha", choices=["alpha", "vb", "mlp"])
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=2500)
    p.add_argument("--out-dir", default="runs/wet-chicken")
    args = p.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    tag = args.method if args.method != "alpha" else f"alpha{args.alpha:g}"
    tag = f"{tag}_seed{args.seed}"
    d = lambda name: os.path.join(args.out_dir, name)

    train_csv = d(f"train_seed{args.seed}.csv")
    test_csv = d(f"test_seed{args.seed}.csv")
    model_ckpt = d(f"model_{tag}.ckpt")
    policy_ckpt = d(f"policy_{tag}.ckpt")

    steps = [
        ["gen-data", "wet-chicken-trajectory", str(args.n),
         "--seed", str(args.seed), "--out", train_csv],
        ["gen-data", "wet-chicken-trajectory", str(args.n),
         "--seed", str(args.seed + 10_000), "--out", test_csv],
        ["train-model", "--data", train_csv, "--out", model_ckpt,
         "--benchmark", "wet-chicken", "--method", args.method,
         "--alpha", str(args.alpha), "--seed", str(args.seed)],
        ["eval-model", "--checkpoint", model_ckpt, "--test", test_csv,
         "--samples", "3000", "--seed", str(args.seed),
         "--method-name", tag, "--out", d("model_metrics.csv")],
        ["train-policy", "--model", model_ckpt, "--data", train_csv,
         "--out", policy_ckpt, "--benchmark", "wet-chicken",
         "--method", args.method, "--alpha", str(args.alpha),
         "--seed", str(args.seed)],
        ["eval-policy", "--policy", policy_ckpt, "--seed", str(args.seed),
         "--method-name", tag, "--out", d("policy_metrics.csv")],
    ]
    for argv in steps:
        rc = cli.main(argv)
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
