"""Non-Bayesian MLP baseline and configuration presets.

The MLP shares the autodiff core and the architecture dimensions of the
BNN it is compared against, so the inference method is the only thing that
differs.  Its predictions are made stochastic for roll-outs and test
metrics by additive Gaussian noise whose variance is the maximum-likelihood
fit on a held-out validation split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .bnn import (Adam, BnnArchitecture, FittedModel, ModelHyperparams,
                  VariationalPosterior, forward)
from .environments import normalize


def vb_preset(hyper):
    """Variational Bayes = the alpha energy in its alpha -> 0 limit."""
    return replace(hyper, alpha=1e-6)


def freeze_z_option(hyper):
    """Keep q(z) fixed to the prior: z parameters leave the optimizer."""
    return replace(hyper, learn_z=False)


@dataclass
class MlpConfig:
    epochs: int = 1000
    batch_size: int = 250
    learning_rate: float = 0.01
    validation_fraction: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


def train_mlp(dataset, arch, config, stream):
    """Fit a deterministic net by minibatch MSE with early stopping.

    Keeps the parameters from the best-validation epoch, then sets the
    per-dimension noise variance to the mean squared validation residual.
    Returns a FittedModel whose posterior is a point mass (log-variance
    -50) so prediction and roll-out code paths are shared with the BNN.
    """
    if dataset.n < 10:
        raise ValueError("need at least 10 rows to hold out validation data")
    arch = replace(arch, stochastic_input=False)
    data = normalize(dataset)
    n_val = max(1, int(round(dataset.n * config.validation_fraction)))
    perm = np.argsort(stream.uniform01((dataset.n,)), kind="stable")
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    Xt, Yt = data.X[train_idx], data.Y[train_idx]
    Xv, Yv = data.X[val_idx], data.Y[val_idx]

    weights = [stream.standard_normal((1,) + shape) / math.sqrt(shape[1])
               for shape in arch.layer_shapes()]
    opt = Adam(weights, config.learning_rate, config.beta1, config.beta2,
               config.adam_eps)

    def val_mse():
        pred = _mlp_forward_np(weights, Xv)
        return float(((pred - Yv) ** 2).mean())

    best = val_mse()
    best_weights = [w.copy() for w in weights]
    n = Xt.shape[0]
    n_batches = max(1, math.ceil(n / config.batch_size))
    for epoch in range(config.epochs):
        idx_perm = np.argsort(stream.uniform01((n,)), kind="stable")
        for b in range(n_batches):
            idx = idx_perm[b * config.batch_size:(b + 1) * config.batch_size]
            leaves = [Tensor(w, requires_grad=True) for w in weights]
            out = forward(leaves, Tensor(Xt[idx]), None)
            err = out - Tensor(Yt[idx].reshape((1,) + Yt[idx].shape))
            loss = ad.mean_axis(ad.square(err))
            ad.backward(loss)
            opt.step([t.grad if t.grad is not None else np.zeros_like(t.data)
                      for t in leaves])
        cur = val_mse()
        if cur < best:
            best = cur
            best_weights = [w.copy() for w in weights]

    resid = _mlp_forward_np(best_weights, Xv) - Yv
    noise_var = np.maximum((resid ** 2).mean(axis=0), 1e-12)

    post = VariationalPosterior(
        weight_means=[w[0].copy() for w in best_weights],
        weight_logvars=[np.full(w[0].shape, -50.0) for w in best_weights],
        z_mean=np.zeros(0), z_logvar=np.zeros(0),
        log_sigma2=np.log(noise_var),
    )
    hyper = ModelHyperparams(alpha=1.0, learn_sigma=False, learn_z=False,
                             epochs=config.epochs,
                             batch_size=config.batch_size,
                             learning_rate=config.learning_rate,
                             gamma=float(arch.input_dim))
    return FittedModel(arch, post, hyper, data.x_stats, data.y_stats,
                       loss_trace=[best])


def _mlp_forward_np(weights, x):
    h = x
    n_layers = len(weights)
    for l, w in enumerate(weights):
        h = np.concatenate([h, np.ones(h.shape[:-1] + (1,))], axis=-1)
        h = h @ w[0].T
        if l < n_layers - 1:
            h = np.maximum(h, 0.0)
    return h
