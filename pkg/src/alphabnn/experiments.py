"""Orchestration shared by the CLI and the experiment scripts: dispatching
methods to trainers, metric rows, and the multi-seed table runs."""

from __future__ import annotations

import math
import time

import numpy as np

from . import baselines, bnn, config as cfgmod, environments as envs, policy as pol
from .rng import RngStream

# stream ids reserved per phase so replays never overlap
STREAM_DATA = 1
STREAM_TRAIN = 2
STREAM_EVAL = 3
STREAM_POLICY = 4
STREAM_POLICY_EVAL = 5


def make_architecture(cfg, dataset):
    return bnn.BnnArchitecture(
        input_dim=dataset.X.shape[1],
        output_dim=dataset.Y.shape[1],
        hidden=tuple(cfg.model.hidden),
        stochastic_input=True,
    )


def make_hyper(cfg):
    m = cfg.model
    alpha = cfg.experiment.alpha
    if cfg.experiment.method == "vb":
        alpha = 1e-6
    return bnn.ModelHyperparams(
        alpha=alpha,
        lam=m.lam,
        gamma=None if m.gamma < 0 else m.gamma,
        sigma2_init=m.sigma2_init,
        learn_sigma=m.learn_sigma,
        learn_z=m.learn_z,
        z_init_var=None if m.z_init_var < 0 else m.z_init_var,
        K=m.K,
        batch_size=m.batch_size,
        epochs=m.epochs,
        learning_rate=m.learning_rate,
    )


def generate_dataset(generator, n, stream):
    if generator not in envs.GENERATORS:
        raise ValueError(f"unknown generator {generator!r}; "
                         f"expected one of {sorted(envs.GENERATORS)}")
    ds = envs.GENERATORS[generator](n, stream)
    if generator.startswith("wet-chicken"):
        ds.meta["x_columns"] = ["x", "y", "ax", "ay"]
        ds.meta["y_columns"] = ["dx", "dy"]
    else:
        ds.meta["x_columns"] = ["x"]
        ds.meta["y_columns"] = ["y"]
    return ds


def train_model(cfg, dataset, seed, callback=None):
    """Train the configured method on a dataset; returns a FittedModel."""
    stream = RngStream(seed, STREAM_TRAIN)
    if cfg.experiment.method == "mlp":
        mcfg = baselines.MlpConfig(
            epochs=cfg.model.epochs,
            batch_size=cfg.model.batch_size,
            learning_rate=cfg.model.learning_rate,
            validation_fraction=cfg.model.validation_fraction,
        )
        arch = make_architecture(cfg, dataset)
        return baselines.train_mlp(dataset, arch, mcfg, stream)
    arch = make_architecture(cfg, dataset)
    hyper = make_hyper(cfg)
    return bnn.train(dataset, arch, hyper, stream, callback=callback)


def eval_model(model, test_set, S, seed):
    stream = RngStream(seed, STREAM_EVAL)
    return bnn.test_metrics(model, test_set, S, stream)


def train_policy(cfg, model, dataset, seed, callback=None):
    stream = RngStream(seed, STREAM_POLICY)
    rcfg = pol.RolloutConfig(
        horizon=cfg.policy.horizon,
        samples=cfg.policy.samples,
        batch_size=cfg.policy.batch_size,
        epochs=cfg.policy.epochs,
        learning_rate=cfg.policy.learning_rate,
    )
    return pol.train_policy(model, dataset, rcfg, stream, callback=callback)


def eval_policy(policy, episodes, steps, seed):
    stream = RngStream(seed, STREAM_POLICY_EVAL)
    return pol.evaluate_policy(policy, episodes, steps, stream)


def metrics_row(method, seed, metrics):
    """Flat CSV-ready row: method, seed, mse, ll, mse_y, ll_y."""
    y_dim = min(1, metrics["mse_dim"].size - 1)
    return {
        "method": method,
        "seed": seed,
        "mse": metrics["mse"],
        "ll": metrics["ll"],
        "mse_y": float(metrics["mse_dim"][y_dim]),
        "ll_y": float(metrics["ll_dim"][y_dim]),
    }


def method_label(method, alpha):
    if method == "alpha":
        return f"alpha={alpha:g}"
    return method


def run_model_experiment(benchmark, method, alpha, seed, overrides=None):
    """Data generation + training + test metrics for one seed."""
    cfg = cfgmod.default_config(benchmark, method, alpha, seed)
    if overrides:
        overrides(cfg)
    train_ds = generate_dataset(cfg.experiment.generator, cfg.experiment.n_train,
                                RngStream(seed, STREAM_DATA))
    test_ds = generate_dataset(cfg.experiment.generator, cfg.experiment.n_test,
                               RngStream(seed + 10_000, STREAM_DATA))
    model = train_model(cfg, train_ds, seed)
    metrics = eval_model(model, test_ds, cfg.evaluation.predictive_samples, seed)
    return cfg, train_ds, model, metrics


def run_policy_experiment(benchmark, method, alpha, seed, overrides=None):
    """Full pipeline through policy training and true-dynamics evaluation."""
    cfg, train_ds, model, metrics = run_model_experiment(
        benchmark, method, alpha, seed, overrides)
    policy, trace = train_policy(cfg, model, train_ds, seed)
    mean, stderr, per_ep = eval_policy(policy, cfg.evaluation.episodes,
                                       cfg.evaluation.steps, seed)
    return {
        "config": cfg, "model": model, "model_metrics": metrics,
        "policy": policy, "objective_trace": trace,
        "reward_mean": mean, "reward_stderr": stderr,
        "reward_per_episode": per_ep,
    }


def mean_stderr(values):
    v = np.asarray(values, dtype=np.float64)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def write_table(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")
