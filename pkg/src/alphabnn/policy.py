"""Policy search by differentiating Monte-Carlo roll-outs through a fitted
transition model.

The policy is a deterministic feed-forward network (rectifier hidden
layers, tanh-squashed outputs scaled to the action bounds).  A roll-out
samples K weight sets from the model posterior once, then steps the model
T times with fresh disturbance and output-noise draws per step; the summed
cost, averaged over samples, is differentiable w.r.t. the policy weights.

Roll-outs run on de-normalized states so the cost function always sees
original units; model inputs are re-normalized each step.  Normalized
states are squashed through a wide tanh before entering the policy/model
so early-training extrapolation cannot blow up while gradients stay
nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .bnn import Adam, forward, forward_np, predictive_noise_var, _sample_weight_arrays
from .environments import DEFAULT_PARAMS, wet_chicken_step_batch

STATE_CLIP = 10.0  # in normalized units


@dataclass
class Policy:
    weights: list  # per-layer (V_l, V_{l-1}+1) arrays
    state_dim: int
    action_dim: int
    action_low: float = -1.0
    action_high: float = 1.0
    # input standardization, copied from the model's feature stats
    state_mean: np.ndarray = None
    state_std: np.ndarray = None

    def copy(self):
        return Policy([w.copy() for w in self.weights], self.state_dim,
                      self.action_dim, self.action_low, self.action_high,
                      None if self.state_mean is None else self.state_mean.copy(),
                      None if self.state_std is None else self.state_std.copy())


def init_policy(state_dim, action_dim, stream, hidden=(20, 20),
                state_mean=None, state_std=None):
    widths = [state_dim] + list(hidden) + [action_dim]
    weights = [stream.standard_normal((widths[i + 1], widths[i] + 1))
               / math.sqrt(widths[i] + 1)
               for i in range(len(widths) - 1)]
    return Policy(weights, state_dim, action_dim,
                  state_mean=state_mean, state_std=state_std)


def _policy_forward_graph(weight_tensors, s_norm):
    """s_norm: (..., state_dim) node in normalized units -> bounded action."""
    h = s_norm
    lead = s_norm.data.shape[:-1]
    ones = Tensor(np.ones(lead + (1,)))
    n_layers = len(weight_tensors)
    for l, w in enumerate(weight_tensors):
        h = ad.concat_axis([h, ones], axis=h.data.ndim - 1)
        wt = ad.transpose(w) if w.data.ndim == 2 else ad.transpose(w, (0, 2, 1))
        h = ad.matmul(h, wt)
        if l < n_layers - 1:
            h = ad.relu(h)
    return ad.tanh(h)


def policy_act(state, policy):
    """Plain-numpy action for one state or a batch of states."""
    s = np.atleast_2d(np.asarray(state, dtype=np.float64))
    if policy.state_mean is not None:
        s = (s - policy.state_mean) / policy.state_std
        s = STATE_CLIP * np.tanh(s / STATE_CLIP)
    h = s
    n_layers = len(policy.weights)
    for l, w in enumerate(policy.weights):
        h = np.concatenate([h, np.ones(h.shape[:-1] + (1,))], axis=-1)
        h = h @ w.T
        if l < n_layers - 1:
            h = np.maximum(h, 0.0)
    a = np.tanh(h)
    lo, hi = policy.action_low, policy.action_high
    a = lo + (hi - lo) * (a + 1.0) / 2.0
    return a[0] if np.asarray(state).ndim == 1 else a


@dataclass
class RolloutConfig:
    horizon: int = 5
    samples: int = 20       # K roll-out samples per gradient step
    batch_size: int = 10    # start states per minibatch
    epochs: int = 100
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self):
        if self.horizon < 1 or self.samples < 1:
            raise ValueError("horizon and samples must be >= 1")


def cost_wet_chicken(s_node, params=DEFAULT_PARAMS):
    """c(s) = l - y on a (..., 2) state node; minimizing it maximizes reward."""
    y = s_node[..., 1]
    return params.length - y


def unfold(s0, model, policy_tensors, policy, T, K, stream,
           cost_fn=cost_wet_chicken, weight_arrays=None, noise_draws=None):
    """Average roll-out cost C/K as a scalar node.

    s0: (B, state_dim) start states in original units.  Model weights are
    sampled once per roll-out (before the time loop); disturbances z and
    output noise eps are drawn per step.  Pass ``weight_arrays`` and/or
    ``noise_draws`` (a per-step list of (z, eps) arrays) to reuse fixed
    draws (finite-difference checks, sample decompositions).
    """
    s0 = np.atleast_2d(np.asarray(s0, dtype=np.float64))
    B, sdim = s0.shape
    if weight_arrays is None:
        weight_arrays = _sample_weight_arrays(model.posterior, K, stream)
    w_tensors = [Tensor(w) for w in weight_arrays]

    xs = model.x_stats
    s_mean, s_std = xs.mean[:sdim], xs.std[:sdim]
    a_mean, a_std = xs.mean[sdim:], xs.std[sdim:]
    y_mean, y_std = model.y_stats.mean, model.y_stats.std
    noise_var = predictive_noise_var(model)
    gamma = model.gamma

    s = ad.broadcast_to(Tensor(s0.reshape(1, B, sdim)), (K, B, sdim))
    total = None
    for t in range(T):
        s_norm = (s - Tensor(s_mean)) * Tensor(1.0 / s_std)
        s_norm = STATE_CLIP * ad.tanh(s_norm * (1.0 / STATE_CLIP))
        a = _policy_forward_graph(policy_tensors, s_norm)
        lo, hi = policy.action_low, policy.action_high
        a = lo + (hi - lo) * (a + 1.0) * 0.5
        a_norm = (a - Tensor(a_mean)) * Tensor(1.0 / a_std)
        feats = ad.concat_axis([s_norm, a_norm], axis=2)

        if noise_draws is not None:
            z_arr, eps_arr = noise_draws[t]
        else:
            z_arr = stream.standard_normal((K, B)) * math.sqrt(gamma)
            eps_arr = stream.standard_normal((K, B, sdim)) * np.sqrt(noise_var)
        z = Tensor(z_arr) if model.architecture.stochastic_input else None
        delta = _model_forward(w_tensors, feats, z)
        delta = delta * Tensor(y_std) + Tensor(y_mean)
        s = s + delta + Tensor(eps_arr)
        if not np.all(np.isfinite(s.data)):
            raise ad.NonFiniteError(f"roll-out state non-finite at step {t}")
        c = ad.mean_axis(cost_fn(s))
        total = c if total is None else total + c
    return total


def _model_forward(w_tensors, feats, z):
    """forward() variant taking an already-normalized (K,B,D) feature node."""
    K, B, _ = feats.data.shape
    h = feats
    if z is not None:
        h = ad.concat_axis([h, ad.reshape(z, (K, B, 1))], axis=2)
    ones = Tensor(np.ones((K, B, 1)))
    n_layers = len(w_tensors)
    for l, w in enumerate(w_tensors):
        h = ad.concat_axis([h, ones], axis=2)
        h = ad.matmul(h, ad.transpose(w, (0, 2, 1)))
        if l < n_layers - 1:
            h = ad.relu(h)
    return h


def train_policy(model, dataset, config, stream, cost_fn=cost_wet_chicken,
                 callback=None):
    """Adam descent on the Monte-Carlo roll-out cost.

    Start states are the state columns of the training transitions,
    reshuffled into minibatches each epoch; all stochastic draws are
    resampled every step.  Returns the policy and its objective trace.
    """
    config.validate()
    sdim = model.architecture.output_dim
    starts = dataset.X[:, :sdim]
    xs = model.x_stats
    policy = init_policy(sdim, model.architecture.input_dim - sdim, stream,
                         state_mean=xs.mean[:sdim], state_std=xs.std[:sdim])
    opt = Adam(policy.weights, config.learning_rate, config.beta1,
               config.beta2, config.adam_eps)
    trace = []
    n = starts.shape[0]
    n_batches = max(1, n // config.batch_size)
    for epoch in range(config.epochs):
        perm = np.argsort(stream.uniform01((n,)), kind="stable")
        epoch_cost = 0.0
        for b in range(n_batches):
            idx = perm[b * config.batch_size:(b + 1) * config.batch_size]
            leaves = [Tensor(w, requires_grad=True) for w in policy.weights]
            root = unfold(starts[idx], model, leaves, policy,
                          config.horizon, config.samples, stream,
                          cost_fn=cost_fn)
            if not np.isfinite(root.data):
                raise RuntimeError(
                    f"roll-out objective non-finite at epoch {epoch}, batch {b}")
            ad.backward(root)
            opt.step([t.grad if t.grad is not None else np.zeros_like(t.data)
                      for t in leaves])
            epoch_cost += float(root.data)
        trace.append(epoch_cost / n_batches)
        if callback is not None:
            callback(epoch, trace[-1])
    return policy, trace


def evaluate_policy(policy, episodes, steps, stream, params=DEFAULT_PARAMS):
    """Run the true Wet-Chicken dynamics under the policy.

    Each episode starts at (0, 0) and runs ``steps`` steps with its own
    substream.  Returns (mean reward per step, standard error over
    episodes, per-episode means).
    """
    if steps < 1 or episodes < 1:
        raise ValueError("need episodes >= 1 and steps >= 1")
    per_episode = np.zeros(episodes)
    for e in range(episodes):
        ep_stream = stream.substream(1000 + e)
        states = np.zeros((1, 2))
        total = 0.0
        for _ in range(steps):
            a = policy_act(states, policy)
            taus = ep_stream.uniform(-1.0, 1.0, (1,))
            states = wet_chicken_step_batch(states, np.atleast_2d(a), taus, params)
            total += -(params.length - states[0, 1])
        per_episode[e] = total / steps
    mean = float(per_episode.mean())
    stderr = float(per_episode.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return mean, stderr, per_episode
