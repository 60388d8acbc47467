"""Wet-Chicken ground-truth dynamics, toy regression generators and dataset
plumbing (normalization, time embedding, CSV I/O).

Wet-Chicken: a canoeist paddles on a w x l river ending in a waterfall at
y = l.  Drift grows with x, turbulence shrinks with x, and crossing the
waterfall resets the canoeist to the origin, which makes the transition
density bimodal near the fall and heteroskedastic everywhere.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class WetChickenParams:
    width: float = 5.0
    length: float = 5.0

    def __post_init__(self):
        if self.width <= 0 or self.length <= 0:
            raise ValueError("river dimensions must be positive")


DEFAULT_PARAMS = WetChickenParams()


def wet_chicken_step(state, action, tau, params=DEFAULT_PARAMS):
    """One deterministic transition given the turbulence draw ``tau``.

    The x-cases are evaluated top to bottom as listed (left-bank clamp,
    waterfall reset, right-bank clamp, drift); the waterfall reset uses a
    strict y_hat > l, so landing exactly on the lip survives.
    """
    x, y = state
    ax, ay = action
    w, l = params.width, params.length
    if not (0.0 <= x <= w and 0.0 <= y <= l):
        raise ValueError(f"state {state} outside river [0,{w}]x[0,{l}]")
    if not (-1.0 <= ax <= 1.0 and -1.0 <= ay <= 1.0):
        raise ValueError(f"action {action} outside [-1,1]^2")
    if not -1.0 <= tau <= 1.0:
        raise ValueError(f"tau {tau} outside [-1,1]")

    v = 3.0 * x / w            # drift, grows across the river
    s = 3.5 - v                # turbulence magnitude, v + s = 3.5
    y_hat = y + (ay - 1.0) + v + s * tau

    if x + ax < 0.0:
        x_next = 0.0
    elif y_hat > l:
        x_next = 0.0
    elif x + ax > w:
        x_next = w
    else:
        x_next = x + ax

    if y_hat < 0.0:
        y_next = 0.0
    elif y_hat > l:
        y_next = 0.0
    else:
        y_next = y_hat

    return (x_next, y_next)


def wet_chicken_step_random(state, action, stream, params=DEFAULT_PARAMS):
    tau = stream.uniform(-1.0, 1.0)
    return wet_chicken_step(state, action, tau, params)


def wet_chicken_step_batch(states, actions, taus, params=DEFAULT_PARAMS):
    """Vectorized transition: states (n,2), actions (n,2), taus (n,)."""
    x, y = states[:, 0], states[:, 1]
    ax, ay = actions[:, 0], actions[:, 1]
    w, l = params.width, params.length
    v = 3.0 * x / w
    s = 3.5 - v
    y_hat = y + (ay - 1.0) + v + s * taus

    x_next = x + ax
    x_next = np.clip(x_next, 0.0, w)
    x_next = np.where(x + ax < 0.0, 0.0, x_next)
    x_next = np.where(y_hat > l, 0.0, x_next)
    y_next = np.where((y_hat < 0.0) | (y_hat > l), 0.0, y_hat)
    return np.stack([x_next, y_next], axis=1)


def reward(state, params=DEFAULT_PARAMS):
    """r = -(l - y): zero at the waterfall lip, -l at the origin."""
    return -(params.length - state[1])


# ---------------------------------------------------------------------------
# datasets


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # columns with zero variance (std forced to 1)


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    x_stats: NormStats | None = None
    y_stats: NormStats | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError(
                f"row count mismatch: X has {self.X.shape[0]}, Y has {self.Y.shape[0]}")

    @property
    def n(self):
        return self.X.shape[0]


def _column_stats(m):
    mean = m.mean(axis=0)
    std = m.std(axis=0)
    constant = std == 0.0
    std = np.where(constant, 1.0, std)
    return NormStats(mean=mean, std=std, constant=constant)


def normalize(dataset):
    """Standardize columns of X and Y; stats are stored on the result."""
    xs = _column_stats(dataset.X)
    ys = _column_stats(dataset.Y)
    return Dataset(
        X=(dataset.X - xs.mean) / xs.std,
        Y=(dataset.Y - ys.mean) / ys.std,
        x_stats=xs,
        y_stats=ys,
        meta=dict(dataset.meta),
    )


def denormalize(values, stats):
    return values * stats.std + stats.mean


def apply_normalization(values, stats):
    return (values - stats.mean) / stats.std


def gen_wet_chicken_batch(n, stream, params=DEFAULT_PARAMS):
    """n i.i.d. transitions from uniform states/actions.

    Features (x, y, ax, ay); targets are the state change (dx, dy).
    """
    if n < 1:
        raise ValueError("need at least one transition")
    x = stream.uniform(0.0, params.width, (n,))
    y = stream.uniform(0.0, params.length, (n,))
    a = stream.uniform(-1.0, 1.0, (n, 2))
    taus = stream.uniform(-1.0, 1.0, (n,))
    states = np.stack([x, y], axis=1)
    nxt = wet_chicken_step_batch(states, a, taus, params)
    X = np.concatenate([states, a], axis=1)
    Y = nxt - states
    return Dataset(X=X, Y=Y, meta={
        "generator": "wet-chicken",
        "seed": stream.master_seed,
        "n": n,
        "columns": "x,y,ax,ay,dx,dy",
    })


def gen_wet_chicken_trajectory(n, stream, params=DEFAULT_PARAMS):
    """n sequential transitions from a random-action walk started at (0, 0).

    Same feature/target layout as gen_wet_chicken_batch, but the state
    distribution is the one an undirected explorer actually visits, which is
    concentrated upstream (resets keep pushing the canoeist back to y = 0).
    """
    if n < 1:
        raise ValueError("need at least one transition")
    states = np.empty((n, 2))
    actions = stream.uniform(-1.0, 1.0, (n, 2))
    taus = stream.uniform(-1.0, 1.0, (n,))
    s = (0.0, 0.0)
    for i in range(n):
        states[i] = s
        s = wet_chicken_step(s, actions[i], taus[i], params)
    X = np.concatenate([states, actions], axis=1)
    Y = wet_chicken_step_batch(states, actions, taus, params) - states
    return Dataset(X=X, Y=Y, meta={
        "generator": "wet-chicken-trajectory",
        "seed": stream.master_seed,
        "n": n,
        "columns": "x,y,ax,ay,dx,dy",
    })


def toy_bimodal(n, stream):
    """y = 10 sin(x) + e or 10 cos(x) + e with equal probability, x in [-2,2]."""
    x = stream.uniform(-2.0, 2.0, (n,))
    branch = stream.uniform(0.0, 1.0, (n,)) < 0.5
    eps = stream.standard_normal((n,))
    y = np.where(branch, 10.0 * np.sin(x), 10.0 * np.cos(x)) + eps
    return Dataset(X=x[:, None], Y=y[:, None], meta={
        "generator": "toy-bimodal", "seed": stream.master_seed, "n": n,
        "columns": "x,y",
    })


def toy_heteroskedastic(n, stream):
    """y = 7 sin(x) + 3 |cos(x/2)| e, x in [-4,4]."""
    x = stream.uniform(-4.0, 4.0, (n,))
    eps = stream.standard_normal((n,))
    y = 7.0 * np.sin(x) + 3.0 * np.abs(np.cos(x / 2.0)) * eps
    return Dataset(X=x[:, None], Y=y[:, None], meta={
        "generator": "toy-heteroskedastic", "seed": stream.master_seed, "n": n,
        "columns": "x,y",
    })


GENERATORS = {
    "wet-chicken": gen_wet_chicken_batch,
    "wet-chicken-trajectory": gen_wet_chicken_trajectory,
    "toy-bimodal": toy_bimodal,
    "toy-heteroskedastic": toy_heteroskedastic,
}


def time_embed(observations, window):
    """Stack a window of past observations: row t is [o_{t-n}, ..., o_t]."""
    obs = np.asarray(observations, dtype=np.float64)
    t, d = obs.shape
    if window < 0:
        raise ValueError("window must be non-negative")
    if t <= window:
        raise ValueError(f"need more than window={window} rows, got {t}")
    rows = [np.concatenate([obs[i - window + j] for j in range(window + 1)])
            for i in range(window, t)]
    return np.asarray(rows)


# ---------------------------------------------------------------------------
# file I/O: CSV with a header row, float64 round-trip via 17 significant digits


def write_csv(dataset, path):
    x_cols = dataset.meta.get("x_columns")
    y_cols = dataset.meta.get("y_columns")
    if x_cols is None:
        x_cols = [f"x{i}" for i in range(dataset.X.shape[1])]
    if y_cols is None:
        y_cols = [f"y{i}" for i in range(dataset.Y.shape[1])]
    header = ",".join(list(x_cols) + list(y_cols))
    body = np.concatenate([dataset.X, dataset.Y], axis=1)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in body:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    _write_sidecar(dataset, path)


def _write_sidecar(dataset, path):
    side = path + ".meta"
    with open(side, "w") as fh:
        for key in sorted(dataset.meta):
            fh.write(f"{key}={dataset.meta[key]}\n")
        fh.write(f"n_features={dataset.X.shape[1]}\n")
        fh.write(f"n_targets={dataset.Y.shape[1]}\n")


def read_csv(path, n_targets=None):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split(",")
    body = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if body.size == 0:
        raise ValueError(f"{path}: no data rows")
    if body.shape[1] != len(header):
        raise ValueError(
            f"{path}: header has {len(header)} columns, rows have {body.shape[1]}")
    meta = {}
    side = path + ".meta"
    if os.path.exists(side):
        with open(side) as fh:
            for ln in fh:
                if "=" in ln:
                    k, v = ln.strip().split("=", 1)
                    meta[k] = v
    if n_targets is None:
        n_targets = int(meta.get("n_targets", 1))
    X = body[:, :-n_targets]
    Y = body[:, -n_targets:]
    meta["x_columns"] = header[:-n_targets]
    meta["y_columns"] = header[-n_targets:]
    return Dataset(X=X, Y=Y, meta=meta)
