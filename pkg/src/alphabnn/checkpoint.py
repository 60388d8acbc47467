"""Versioned binary checkpoints for models and policies.

Layout (little-endian):

    magic   4 bytes  b"ABNC"
    version u32      currently 1
    hlen    u32      length of the JSON header in bytes
    header  hlen bytes of UTF-8 JSON: kind, architecture, hyperparameters,
                     normalization stats
    nblocks u32
    then per block:
        nlen  u32, name nlen bytes UTF-8
        count u64, count float64 values (raw IEEE-754 bytes)

Round-trips are bit-exact: arrays are written with ndarray.tobytes and read
back with frombuffer, shapes restored from the header.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .bnn import BnnArchitecture, FittedModel, ModelHyperparams, VariationalPosterior
from .environments import NormStats
from .policy import Policy

MAGIC = b"ABNC"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _stats_to_json(stats):
    if stats is None:
        return None
    return {"mean": stats.mean.tolist(), "std": stats.std.tolist(),
            "constant": stats.constant.astype(int).tolist()}


def _stats_from_json(obj):
    if obj is None:
        return None
    return NormStats(mean=np.array(obj["mean"], dtype=np.float64),
                     std=np.array(obj["std"], dtype=np.float64),
                     constant=np.array(obj["constant"], dtype=bool))


def _write_blocks(fh, blocks):
    fh.write(struct.pack("<I", len(blocks)))
    for name, arr in blocks:
        raw = name.encode()
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        flat = np.ascontiguousarray(arr, dtype=np.float64).ravel()
        fh.write(struct.pack("<Q", flat.size))
        fh.write(flat.tobytes())


def _read_blocks(fh):
    (nblocks,) = struct.unpack("<I", fh.read(4))
    blocks = {}
    for _ in range(nblocks):
        (nlen,) = struct.unpack("<I", fh.read(4))
        name = fh.read(nlen).decode()
        (count,) = struct.unpack("<Q", fh.read(8))
        blocks[name] = np.frombuffer(fh.read(count * 8), dtype=np.float64).copy()
    return blocks


def _write(path, header, blocks):
    payload = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(payload)))
        fh.write(payload)
        _write_blocks(fh, blocks)


def _read(path, expect_kind):
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not an alphabnn checkpoint")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        if header.get("kind") != expect_kind:
            raise CheckpointError(
                f"{path}: expected kind {expect_kind!r}, got {header.get('kind')!r}")
        return header, _read_blocks(fh)


def save_model(model, path):
    arch = model.architecture
    hyper = model.hyper
    header = {
        "kind": "model",
        "architecture": {
            "input_dim": arch.input_dim,
            "output_dim": arch.output_dim,
            "hidden": list(arch.hidden),
            "stochastic_input": arch.stochastic_input,
        },
        "hyper": {
            "alpha": hyper.alpha, "lam": hyper.lam, "gamma": hyper.gamma,
            "sigma2_init": hyper.sigma2_init, "learn_sigma": hyper.learn_sigma,
            "learn_z": hyper.learn_z, "z_init_var": hyper.z_init_var,
            "K": hyper.K,
            "batch_size": hyper.batch_size, "epochs": hyper.epochs,
            "learning_rate": hyper.learning_rate, "beta1": hyper.beta1,
            "beta2": hyper.beta2, "adam_eps": hyper.adam_eps,
        },
        "x_stats": _stats_to_json(model.x_stats),
        "y_stats": _stats_to_json(model.y_stats),
        "layer_shapes": [list(s) for s in arch.layer_shapes()],
        "n_train": int(model.posterior.z_mean.size),
    }
    blocks = []
    for l, (m, lv) in enumerate(zip(model.posterior.weight_means,
                                    model.posterior.weight_logvars)):
        blocks.append((f"weight_mean_{l}", m))
        blocks.append((f"weight_logvar_{l}", lv))
    blocks.append(("z_mean", model.posterior.z_mean))
    blocks.append(("z_logvar", model.posterior.z_logvar))
    blocks.append(("log_sigma2", model.posterior.log_sigma2))
    _write(path, header, blocks)


def load_model(path):
    header, blocks = _read(path, "model")
    arch = BnnArchitecture(
        input_dim=header["architecture"]["input_dim"],
        output_dim=header["architecture"]["output_dim"],
        hidden=tuple(header["architecture"]["hidden"]),
        stochastic_input=header["architecture"]["stochastic_input"],
    )
    hyper = ModelHyperparams(**header["hyper"])
    shapes = [tuple(s) for s in header["layer_shapes"]]
    post = VariationalPosterior(
        weight_means=[blocks[f"weight_mean_{l}"].reshape(s)
                      for l, s in enumerate(shapes)],
        weight_logvars=[blocks[f"weight_logvar_{l}"].reshape(s)
                        for l, s in enumerate(shapes)],
        z_mean=blocks["z_mean"],
        z_logvar=blocks["z_logvar"],
        log_sigma2=blocks["log_sigma2"],
    )
    return FittedModel(arch, post, hyper,
                       _stats_from_json(header["x_stats"]),
                       _stats_from_json(header["y_stats"]))


def save_policy(policy, path):
    header = {
        "kind": "policy",
        "state_dim": policy.state_dim,
        "action_dim": policy.action_dim,
        "action_low": policy.action_low,
        "action_high": policy.action_high,
        "layer_shapes": [list(w.shape) for w in policy.weights],
        "has_stats": policy.state_mean is not None,
    }
    blocks = [(f"weight_{l}", w) for l, w in enumerate(policy.weights)]
    if policy.state_mean is not None:
        blocks.append(("state_mean", policy.state_mean))
        blocks.append(("state_std", policy.state_std))
    _write(path, header, blocks)


def load_policy(path):
    header, blocks = _read(path, "policy")
    weights = [blocks[f"weight_{l}"].reshape(tuple(s))
               for l, s in enumerate(header["layer_shapes"])]
    return Policy(
        weights=weights,
        state_dim=header["state_dim"],
        action_dim=header["action_dim"],
        action_low=header["action_low"],
        action_high=header["action_high"],
        state_mean=blocks.get("state_mean"),
        state_std=blocks.get("state_std"),
    )
