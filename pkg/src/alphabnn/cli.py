"""Command-line interface.

Subcommands: gen-data, train-model, eval-model, predictive-dump,
train-policy, eval-policy, repro-tables.  Every command writes a JSON run
manifest (command, config snapshot, master seed, timestamps, file digests)
before producing outputs and finalizes it with output digests on success.

Relative output paths are resolved against $ALPHABNN_OUTPUT_ROOT when set.
Exit codes: 0 success, 2 usage/config error, 3 missing or invalid input
file, 4 runtime failure; errors print one line  ``error:<category>: message``
to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import checkpoint as ckpt
from . import config as cfgmod
from . import environments as envs
from . import experiments as exp
from .bnn import predictive_samples
from .environments import wet_chicken_step_random
from .rng import RngStream


def _resolve(path):
    root = os.environ.get("ALPHABNN_OUTPUT_ROOT")
    if root and not os.path.isabs(path):
        os.makedirs(root, exist_ok=True)
        return os.path.join(root, path)
    return path


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    def __init__(self, command, args, seed, config=None):
        self.data = {
            "command": command,
            "argv": vars(args),
            "master_seed": seed,
            "config": config,
            "version": __version__,
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "inputs": {},
            "outputs": {},
        }
        self.path = None

    def add_input(self, path):
        if path and os.path.exists(path):
            self.data["inputs"][path] = _digest(path)

    def write(self, out_path):
        # manifest goes down before any output so a crashed run is auditable
        self.path = out_path + ".manifest.json"
        self._flush()

    def finish(self, outputs):
        for p in outputs:
            if os.path.exists(p):
                self.data["outputs"][p] = _digest(p)
        self.data["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        self._flush()

    def _flush(self):
        with open(self.path, "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


class CliError(Exception):
    def __init__(self, category, message, code):
        super().__init__(message)
        self.category = category
        self.code = code


def _require_file(path):
    if not os.path.exists(path):
        raise CliError("missing-input", f"file not found: {path}", 3)
    return path


def _load_config(args):
    if getattr(args, "config", None):
        _require_file(args.config)
        try:
            cfg = cfgmod.load(args.config)
        except cfgmod.ConfigError as e:
            raise CliError("config", str(e), 2)
    else:
        cfg = cfgmod.default_config(args.benchmark, args.method,
                                    getattr(args, "alpha", 0.5), args.seed)
    if getattr(args, "method", None):
        cfg.experiment.method = args.method
    if getattr(args, "alpha", None) is not None and args.method == "alpha":
        cfg.experiment.alpha = args.alpha
    if cfg.experiment.method == "vb":
        cfg.experiment.alpha = 1e-6
    cfg.experiment.seed = args.seed
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args):
    out = _resolve(args.out)
    man = Manifest("gen-data", args, args.seed)
    man.write(out)
    stream = RngStream(args.seed, exp.STREAM_DATA)
    ds = exp.generate_dataset(args.benchmark, args.n, stream)
    envs.write_csv(ds, out)
    man.finish([out, out + ".meta"])
    print(f"wrote {ds.n} rows to {out}")
    return 0


def cmd_train_model(args):
    _require_file(args.data)
    cfg = _load_config(args)
    out = _resolve(args.out)
    man = Manifest("train-model", args, args.seed, cfgmod.to_dict(cfg))
    man.add_input(args.data)
    if getattr(args, "config", None):
        man.add_input(args.config)
    man.write(out)

    dataset = envs.read_csv(args.data)
    model = exp.train_model(cfg, dataset, args.seed)
    ckpt.save_model(model, out)
    trace_path = out + ".trace.csv"
    exp.write_table(trace_path, ["epoch", "energy"],
                    list(enumerate(model.loss_trace)))
    man.finish([out, trace_path])
    print(f"trained {exp.method_label(cfg.experiment.method, cfg.experiment.alpha)} "
          f"model; checkpoint at {out}")
    return 0


def cmd_eval_model(args):
    _require_file(args.checkpoint)
    _require_file(args.test)
    out = _resolve(args.out) if args.out else None
    man = Manifest("eval-model", args, args.seed)
    man.add_input(args.checkpoint)
    man.add_input(args.test)
    man.write(out or _resolve(args.checkpoint + ".eval"))

    model = ckpt.load_model(args.checkpoint)
    test_ds = envs.read_csv(args.test)
    metrics = exp.eval_model(model, test_ds, args.samples, args.seed)
    row = exp.metrics_row(args.method_name or "model", args.seed, metrics)
    header = list(row)
    line = ",".join(str(row[k]) for k in header)
    print(",".join(header))
    print(line)
    outputs = []
    if out:
        new = not os.path.exists(out)
        with open(out, "a") as fh:
            if new:
                fh.write(",".join(header) + "\n")
            fh.write(line + "\n")
        outputs.append(out)
    man.finish(outputs)
    return 0


def cmd_predictive_dump(args):
    _require_file(args.checkpoint)
    out = _resolve(args.out)
    man = Manifest("predictive-dump", args, args.seed)
    man.add_input(args.checkpoint)
    man.write(out)

    model = ckpt.load_model(args.checkpoint)
    stream = RngStream(args.seed, exp.STREAM_EVAL)
    features = np.array([[args.x, args.y, args.ax, args.ay]])
    samples = predictive_samples(model, features, args.samples, stream)
    dy_model = samples[:, 0, 1]

    truth_stream = RngStream(args.seed, exp.STREAM_DATA)
    dy_truth = np.empty(args.samples)
    for i in range(args.samples):
        nxt = wet_chicken_step_random((args.x, args.y), (args.ax, args.ay),
                                      truth_stream)
        dy_truth[i] = nxt[1] - args.y

    with open(out, "w") as fh:
        fh.write("model_sample,truth_sample\n")
        for a, b in zip(dy_model, dy_truth):
            fh.write(f"{a:.17g},{b:.17g}\n")
    man.finish([out])
    print(f"wrote {args.samples} predictive and ground-truth samples to {out}")
    return 0


def cmd_train_policy(args):
    _require_file(args.model)
    _require_file(args.data)
    cfg = _load_config(args)
    out = _resolve(args.out)
    man = Manifest("train-policy", args, args.seed, cfgmod.to_dict(cfg))
    man.add_input(args.model)
    man.add_input(args.data)
    man.write(out)

    model = ckpt.load_model(args.model)
    dataset = envs.read_csv(args.data)
    policy, trace = exp.train_policy(cfg, model, dataset, args.seed)
    ckpt.save_policy(policy, out)
    trace_path = out + ".trace.csv"
    exp.write_table(trace_path, ["epoch", "cost"], list(enumerate(trace)))
    man.finish([out, trace_path])
    print(f"trained policy (T={cfg.policy.horizon}, K={cfg.policy.samples}, "
          f"lr={cfg.policy.learning_rate:g}); checkpoint at {out}")
    return 0


def cmd_eval_policy(args):
    _require_file(args.policy)
    out = _resolve(args.out) if args.out else None
    man = Manifest("eval-policy", args, args.seed)
    man.add_input(args.policy)
    man.write(out or _resolve(args.policy + ".eval"))

    policy = ckpt.load_policy(args.policy)
    mean, stderr, _ = exp.eval_policy(policy, args.episodes, args.steps, args.seed)
    header = "method,seed,mean_reward,stderr"
    line = f"{args.method_name or 'policy'},{args.seed},{mean},{stderr}"
    print(header)
    print(line)
    outputs = []
    if out:
        new = not os.path.exists(out)
        with open(out, "a") as fh:
            if new:
                fh.write(header + "\n")
            fh.write(line + "\n")
        outputs.append(out)
    man.finish(outputs)
    return 0


def cmd_repro_tables(args):
    out_dir = _resolve(args.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    man = Manifest("repro-tables", args, args.seed)
    man.write(os.path.join(out_dir, "repro"))
    seeds = [args.seed + i for i in range(args.seeds)]
    methods = [("mlp", 0.0), ("vb", 1e-6), ("alpha", 0.5), ("alpha", 1.0)]
    t0 = time.time()

    # Tables 1-2: Wet-Chicken policy reward and model quality
    t1_rows, t2_rows = [], []
    for method, alpha in methods:
        rewards, mses, lls = [], [], []
        for seed in seeds:
            res = exp.run_policy_experiment("wet-chicken", method, alpha, seed)
            rewards.append(res["reward_mean"])
            row = exp.metrics_row(method, seed, res["model_metrics"])
            mses.append(row["mse_y"])
            lls.append(row["ll_y"])
            print(f"wet-chicken {exp.method_label(method, alpha)} seed {seed}: "
                  f"reward {res['reward_mean']:.3f} ll_y {row['ll_y']:.3f} "
                  f"mse_y {row['mse_y']:.3f}", flush=True)
        label = exp.method_label(method, alpha)
        t1_rows.append([label, *exp.mean_stderr(rewards)])
        t2_rows.append([label, *exp.mean_stderr(mses), *exp.mean_stderr(lls)])
    exp.write_table(os.path.join(out_dir, "table1_wetchicken.csv"),
                    ["method", "mean_reward", "stderr"], t1_rows)
    exp.write_table(os.path.join(out_dir, "table2_wetchicken.csv"),
                    ["method", "mse_y", "mse_y_stderr", "ll_y", "ll_y_stderr"],
                    t2_rows)

    # Tables 3-4: toy problems, q(z) frozen to the prior
    for table, benchmark in (("table3.csv", "toy-bimodal"),
                             ("table4.csv", "toy-heteroskedastic")):
        rows = []
        for method, alpha in [("vb", 1e-6), ("alpha", 0.5), ("alpha", 1.0)]:
            rmses, lls = [], []
            for seed in seeds:
                _, _, _, metrics = exp.run_model_experiment(
                    benchmark, method, alpha, seed)
                rmses.append(metrics["rmse"])
                lls.append(metrics["ll"])
                print(f"{benchmark} {exp.method_label(method, alpha)} seed {seed}: "
                      f"rmse {rmses[-1]:.3f} ll {lls[-1]:.3f}", flush=True)
            rows.append([exp.method_label(method, alpha),
                         *exp.mean_stderr(rmses), *exp.mean_stderr(lls)])
        exp.write_table(os.path.join(out_dir, table),
                        ["method", "rmse", "rmse_stderr", "ll", "ll_stderr"], rows)

    elapsed = time.time() - t0
    outputs = [os.path.join(out_dir, f) for f in
               ("table1_wetchicken.csv", "table2_wetchicken.csv",
                "table3.csv", "table4.csv")]
    with open(os.path.join(out_dir, "RUNTIME.txt"), "w") as fh:
        fh.write(f"# total desk-scale runtime for {args.seeds} seeds\n")
        fh.write(f"seconds={elapsed:.1f}\n")
    man.finish(outputs + [os.path.join(out_dir, "RUNTIME.txt")])
    print(f"tables written to {out_dir} ({elapsed:.0f}s)")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    p = argparse.ArgumentParser(
        prog="alphabnn",
        description="Model-based policy search with alpha-divergence BNNs")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen-data", help="generate a benchmark transition CSV")
    g.add_argument("benchmark", choices=sorted(envs.GENERATORS))
    g.add_argument("n", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train-model", help="train a transition model")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config", help="config file; defaults from --benchmark otherwise")
    t.add_argument("--benchmark", default="wet-chicken")
    t.add_argument("--method", default="alpha", choices=["alpha", "vb", "mlp"])
    t.add_argument("--alpha", type=float, default=0.5)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train_model)

    e = sub.add_parser("eval-model", help="test metrics for a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--samples", type=int, default=100,
                   help="predictive samples S per test point (default 100)")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="append the metrics row to this CSV")
    e.add_argument("--method-name", default=None)
    e.set_defaults(func=cmd_eval_model)

    d = sub.add_parser("predictive-dump",
                       help="dump predictive and ground-truth dy samples")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--x", type=float, required=True)
    d.add_argument("--y", type=float, required=True)
    d.add_argument("--ax", type=float, required=True)
    d.add_argument("--ay", type=float, required=True)
    d.add_argument("--samples", type=int, default=10000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_predictive_dump)

    tp = sub.add_parser("train-policy", help="optimize a policy on a model")
    tp.add_argument("--model", required=True)
    tp.add_argument("--data", required=True)
    tp.add_argument("--out", required=True)
    tp.add_argument("--config")
    tp.add_argument("--benchmark", default="wet-chicken")
    tp.add_argument("--method", default="alpha", choices=["alpha", "vb", "mlp"])
    tp.add_argument("--alpha", type=float, default=0.5)
    tp.add_argument("--seed", type=int, default=0)
    tp.set_defaults(func=cmd_train_policy)

    ep = sub.add_parser("eval-policy", help="evaluate on true dynamics")
    ep.add_argument("--policy", required=True)
    ep.add_argument("--episodes", type=int, default=5)
    ep.add_argument("--steps", type=int, default=10000)
    ep.add_argument("--seed", type=int, default=0)
    ep.add_argument("--out")
    ep.add_argument("--method-name", default=None)
    ep.set_defaults(func=cmd_eval_policy)

    rt = sub.add_parser("repro-tables", help="re-run the headline result tables")
    rt.add_argument("--out-dir", required=True)
    rt.add_argument("--seeds", type=int, default=5)
    rt.add_argument("--seed", type=int, default=0)
    rt.set_defaults(func=cmd_repro_tables)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error:{e.category}: {e}", file=sys.stderr)
        return e.code
    except cfgmod.ConfigError as e:
        print(f"error:config: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        print(f"error:runtime: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
