"""Bayesian neural network with a stochastic input, trained by minimizing a
local alpha-divergence energy.

The model is y = f(x, z; W) + eps with z ~ N(0, gamma), eps ~ N(0, Sigma),
rectifier hidden layers and identity outputs.  The approximate posterior is
a fully factorized Gaussian over every weight and every per-datapoint
disturbance z_n.  Training minimizes

    E_alpha(q) = -log Z_p
                 - (1/alpha) * (N/|B|) * sum_{n in B}
                   log mean_k exp( alpha * [ log p(y_n | W^k, x_n, z_n^k)
                                             - site_w(W^k) - site_z(z_n^k) ] )

where site_w = (log q(W) - log p(W)) / N and site_z = log q(z_n) - log p(z_n)
are the tied Gaussian site factors expressed as normalized log-density
ratios.  With normalized ratios the negative q-normalizer in the tied-factor
energy cancels against the ratio normalizers, leaving the constant
-log Z_p; see notes in log_Zq below.  As alpha -> 0 this objective equals
the negative ELBO up to that constant, so the VB preset shares this exact
code path.

All expectations are estimated with K joint reparameterized samples of
(W, z_n), so gradients reach every variational mean and log-variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .environments import Dataset, apply_normalization, normalize
from .rng import LOG_2PI, gaussian_log_pdf, gaussian_log_pdf_np, log_mean_exp


@dataclass(frozen=True)
class BnnArchitecture:
    """Layer plan.  ``input_dim`` counts features only; the stochastic input
    z adds one more column, and every layer gets a bias unit on top."""

    input_dim: int
    output_dim: int
    hidden: tuple[int, ...] = (50, 50)
    stochastic_input: bool = True

    def layer_shapes(self):
        widths = [self.input_dim + (1 if self.stochastic_input else 0)]
        widths += list(self.hidden) + [self.output_dim]
        return [(widths[i + 1], widths[i] + 1) for i in range(len(widths) - 1)]


@dataclass
class ModelHyperparams:
    alpha: float = 0.5
    lam: float = 1.0              # prior weight variance
    gamma: float | None = None    # prior disturbance variance; None -> input_dim
    sigma2_init: float = 0.1      # initial output-noise variance (normalized units)
    learn_sigma: bool = True
    learn_z: bool = True          # False: q(z) frozen to the prior
    z_init_var: float | None = None  # initial q(z_n) variance; None -> gamma
    K: int = 50
    batch_size: int = 250
    epochs: int = 1000
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self):
        if self.alpha <= 0.0:
            raise ValueError(
                "alpha must be positive; for variational Bayes use the VB "
                "preset (alpha = 1e-6)")
        if self.alpha > 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.lam <= 0 or (self.gamma is not None and self.gamma <= 0):
            raise ValueError("prior variances must be positive")
        if self.z_init_var is not None and self.z_init_var <= 0:
            raise ValueError("z_init_var must be positive")
        if self.K < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("K, batch_size must be >= 1 and epochs >= 0")


@dataclass
class VariationalPosterior:
    """Means and log-variances for all weights plus the per-datapoint z's."""

    weight_means: list[np.ndarray]
    weight_logvars: list[np.ndarray]
    z_mean: np.ndarray
    z_logvar: np.ndarray
    log_sigma2: np.ndarray

    def copy(self):
        return VariationalPosterior(
            [m.copy() for m in self.weight_means],
            [v.copy() for v in self.weight_logvars],
            self.z_mean.copy(), self.z_logvar.copy(), self.log_sigma2.copy())

    def n_weights(self):
        return sum(m.size for m in self.weight_means)


def init_posterior(arch, hyper, n_train, stream):
    """Weight means ~ N(0, 1/fan_in), log-variances at -10 (near
    deterministic start); z means at zero with variance ``z_init_var``
    (default: the prior variance gamma).  A site variance well below gamma
    keeps the early disturbance samples close to their means, so the mean
    updates see far less sampling noise while the variances are still free
    to grow back toward the prior where the data wants them to."""
    gamma = hyper.gamma if hyper.gamma is not None else float(arch.input_dim)
    z_var = hyper.z_init_var if hyper.z_init_var is not None else gamma
    means, logvars = [], []
    for out_w, in_w in arch.layer_shapes():
        means.append(stream.standard_normal((out_w, in_w)) / math.sqrt(in_w))
        logvars.append(np.full((out_w, in_w), -10.0))
    return VariationalPosterior(
        weight_means=means,
        weight_logvars=logvars,
        z_mean=np.zeros(n_train),
        z_logvar=np.full(n_train, math.log(z_var)),
        log_sigma2=np.full(arch.output_dim, math.log(hyper.sigma2_init)),
    )


@dataclass
class FittedModel:
    architecture: BnnArchitecture
    posterior: VariationalPosterior
    hyper: ModelHyperparams
    x_stats: object = None
    y_stats: object = None
    loss_trace: list = field(default_factory=list)

    @property
    def gamma(self):
        g = self.hyper.gamma
        return g if g is not None else float(self.architecture.input_dim)

    def sigma2(self):
        return np.exp(self.posterior.log_sigma2)


# ---------------------------------------------------------------------------
# graph construction


class _Leaves:
    """Leaf tensors wrapping the posterior's arrays for one graph build."""

    def __init__(self, post):
        self.weight_means = [Tensor(m, requires_grad=True) for m in post.weight_means]
        self.weight_logvars = [Tensor(v, requires_grad=True) for v in post.weight_logvars]
        self.z_mean = Tensor(post.z_mean, requires_grad=True)
        self.z_logvar = Tensor(post.z_logvar, requires_grad=True)
        self.log_sigma2 = Tensor(post.log_sigma2, requires_grad=True)


def sample_weights(leaves, eps_list):
    """Reparameterized weight draws; eps_list[l] has shape (K,) + layer shape."""
    return [m + ad.exp(0.5 * lv) * e
            for m, lv, e in zip(leaves.weight_means, leaves.weight_logvars, eps_list)]


def forward(weights, x, z=None):
    """Run the network on K weight samples at once.

    weights[l]: (K, V_l, V_{l-1}+1); x: (B, D) constant features;
    z: (K, B) disturbance draws or None for a deterministic net.
    Returns a (K, B, output_dim) node.
    """
    K = weights[0].data.shape[0]
    B = x.data.shape[0]
    h = ad.broadcast_to(ad.reshape(x, (1,) + x.data.shape), (K,) + x.data.shape)
    if z is not None:
        h = ad.concat_axis([h, ad.reshape(z, (K, B, 1))], axis=2)
    ones = Tensor(np.ones((K, B, 1)))
    n_layers = len(weights)
    for l, w in enumerate(weights):
        h = ad.concat_axis([h, ones], axis=2)
        h = ad.matmul(h, ad.transpose(w, (0, 2, 1)))
        if l < n_layers - 1:
            h = ad.relu(h)
    return h


def forward_np(weight_arrays, x, z=None):
    """Plain-numpy twin of forward for prediction-time speed."""
    K, B = weight_arrays[0].shape[0], x.shape[0]
    h = np.broadcast_to(x, (K,) + x.shape)
    if z is not None:
        h = np.concatenate([h, z.reshape(K, B, 1)], axis=2)
    ones = np.ones((K, B, 1))
    n_layers = len(weight_arrays)
    for l, w in enumerate(weight_arrays):
        h = np.concatenate([h, np.broadcast_to(ones, (K, B, 1))], axis=2)
        h = h @ np.swapaxes(w, 1, 2)
        if l < n_layers - 1:
            h = np.maximum(h, 0.0)
    return h


def log_site_w(weights, leaves, lam, n_train):
    """(log q(W) - log p(W)) / N per sample, shape (K,)."""
    total = None
    for w, m, lv in zip(weights, leaves.weight_means, leaves.weight_logvars):
        lq = gaussian_log_pdf(w, m, ad.exp(lv))
        lp = gaussian_log_pdf(w, Tensor(0.0), Tensor(lam))
        term = ad.sum_axis(lq - lp, axis=(1, 2))
        total = term if total is None else total + term
    return total * (1.0 / n_train)


def log_site_z(z, m_z, v_z, gamma):
    """log q(z_n) - log p(z_n) elementwise; p = N(0, gamma)."""
    return gaussian_log_pdf(z, m_z, v_z) - gaussian_log_pdf(z, Tensor(0.0), Tensor(gamma))


def log_Zq(post):
    """Log-normalizer of the exponential form of q.

    Per Gaussian factor this is log(2 pi v)/2 + m^2/(2v); reported for
    diagnostics.  The energy itself uses the prior normalizer log_Zp since
    the q-normalizer cancels when the site factors are normalized ratios.
    """
    total = 0.0
    for m, lv in zip(post.weight_means, post.weight_logvars):
        v = np.exp(lv)
        total += float(np.sum(0.5 * np.log(2.0 * np.pi * v) + m * m / (2.0 * v)))
    v = np.exp(post.z_logvar)
    total += float(np.sum(0.5 * np.log(2.0 * np.pi * v) + post.z_mean ** 2 / (2.0 * v)))
    return total


def log_Zp(post, lam, gamma):
    n_w = post.n_weights()
    n_z = post.z_mean.size
    return 0.5 * n_w * math.log(2.0 * math.pi * lam) \
        + 0.5 * n_z * math.log(2.0 * math.pi * gamma)


def energy_alpha(leaves, arch, hyper, gamma, X_B, Y_B, idx, n_train, eps):
    """Minibatch alpha-energy as a scalar node.

    ``eps`` carries the fixed standard-normal draws: a list of per-layer
    (K,)+shape arrays plus a (K, |B|) array for z, so the same graph can be
    rebuilt exactly for finite-difference checks.
    """
    eps_w, eps_z = eps
    K = eps_z.shape[0]
    B = X_B.shape[0]
    weights = sample_weights(leaves, [Tensor(e) for e in eps_w])

    m_zB = ad.gather(leaves.z_mean, idx)
    v_zB = ad.exp(ad.gather(leaves.z_logvar, idx))
    z = m_zB + ad.sqrt(v_zB) * Tensor(eps_z)          # (K, B) by broadcasting

    out = forward(weights, Tensor(X_B), z if arch.stochastic_input else None)
    sigma2 = ad.exp(leaves.log_sigma2)
    ll = ad.sum_axis(gaussian_log_pdf(Tensor(Y_B), out, sigma2), axis=2)  # (K, B)

    site_w = log_site_w(weights, leaves, hyper.lam, n_train)              # (K,)
    ratio = ll - ad.reshape(site_w, (K, 1))
    if arch.stochastic_input:
        ratio = ratio - log_site_z(z, m_zB, v_zB, gamma)

    lme = log_mean_exp(hyper.alpha * ratio, axis=0)                       # (B,)
    data_term = ad.sum_axis(lme) * (-n_train / (B * hyper.alpha))
    return data_term + (-log_Zp_cached(leaves, hyper, gamma, n_train))


def log_Zp_cached(leaves, hyper, gamma, n_train):
    n_w = sum(m.data.size for m in leaves.weight_means)
    return 0.5 * n_w * math.log(2.0 * math.pi * hyper.lam) \
        + 0.5 * n_train * math.log(2.0 * math.pi * gamma)


def draw_energy_eps(arch, K, B, stream):
    eps_w = [stream.standard_normal((K,) + shape) for shape in arch.layer_shapes()]
    eps_z = stream.standard_normal((K, B))
    return eps_w, eps_z


# ---------------------------------------------------------------------------
# optimization


class Adam:
    def __init__(self, arrays, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.arrays = arrays
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction = math.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for a, g, m, v in zip(self.arrays, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            a -= self.lr * correction * m / (np.sqrt(v) + self.eps)


class TrainingDiverged(RuntimeError):
    pass


def train(dataset, arch, hyper, stream, callback=None):
    """Fit the variational posterior and (optionally) Sigma by Adam.

    ``dataset`` is in original units; normalization stats are computed here
    and stored on the returned FittedModel.  Every minibatch resamples the
    weight draws, z draws and uses fresh minibatch order.
    """
    hyper.validate()
    data = normalize(dataset)
    n_train = data.n
    gamma = hyper.gamma if hyper.gamma is not None else float(arch.input_dim)
    post = init_posterior(arch, hyper, n_train, stream)

    param_arrays = list(post.weight_means) + list(post.weight_logvars)
    if hyper.learn_z and arch.stochastic_input:
        param_arrays += [post.z_mean, post.z_logvar]
    if hyper.learn_sigma:
        param_arrays.append(post.log_sigma2)
    opt = Adam(param_arrays, hyper.learning_rate, hyper.beta1, hyper.beta2,
               hyper.adam_eps)

    model = FittedModel(arch, post, hyper, data.x_stats, data.y_stats)
    n_batches = max(1, math.ceil(n_train / hyper.batch_size))
    step = 0
    for epoch in range(hyper.epochs):
        perm = np.argsort(stream.uniform01((n_train,)), kind="stable")
        for b in range(n_batches):
            idx = perm[b * hyper.batch_size:(b + 1) * hyper.batch_size]
            if idx.size == 0:
                continue
            leaves = _Leaves(post)
            eps = draw_energy_eps(arch, hyper.K, idx.size, stream)
            root = energy_alpha(leaves, arch, hyper, gamma,
                                data.X[idx], data.Y[idx], idx, n_train, eps)
            if not np.isfinite(root.data):
                raise TrainingDiverged(
                    f"energy became non-finite at epoch {epoch}, batch {b}")
            ad.backward(root)
            grads = _collect_grads(leaves, hyper, arch)
            opt.step(grads)
            step += 1
        model.loss_trace.append(float(root.data))
        if callback is not None:
            callback(epoch, float(root.data))
    return model


def _collect_grads(leaves, hyper, arch):
    grads = [t.grad if t.grad is not None else np.zeros_like(t.data)
             for t in leaves.weight_means + leaves.weight_logvars]
    if hyper.learn_z and arch.stochastic_input:
        for t in (leaves.z_mean, leaves.z_logvar):
            grads.append(t.grad if t.grad is not None else np.zeros_like(t.data))
    if hyper.learn_sigma:
        t = leaves.log_sigma2
        grads.append(t.grad if t.grad is not None else np.zeros_like(t.data))
    return grads


# ---------------------------------------------------------------------------
# prediction and evaluation


def _sample_weight_arrays(post, S, stream):
    ws = []
    for m, lv in zip(post.weight_means, post.weight_logvars):
        eps = stream.standard_normal((S,) + m.shape)
        ws.append(m + np.exp(0.5 * lv) * eps)
    return ws


def predictive_mean_draws(model, x_star, S, stream):
    """S draws of f(x*, z*; W) in original target units, shape (S, n, K_out).

    Fresh W ~ q and z* ~ N(0, gamma) per draw; no additive noise.
    """
    x_star = np.atleast_2d(np.asarray(x_star, dtype=np.float64))
    xn = apply_normalization(x_star, model.x_stats) if model.x_stats else x_star
    ws = _sample_weight_arrays(model.posterior, S, stream)
    z = None
    if model.architecture.stochastic_input:
        z = stream.standard_normal((S, xn.shape[0])) * math.sqrt(model.gamma)
    out = forward_np(ws, xn, z)
    if model.y_stats is not None:
        out = out * model.y_stats.std + model.y_stats.mean
    return out


def predictive_noise_var(model):
    """De-normalized output-noise variances, floored at 1e-8."""
    var = model.sigma2()
    if model.y_stats is not None:
        var = var * model.y_stats.std ** 2
    return np.maximum(var, 1e-8)


def predictive_samples(model, x_star, S, stream):
    """Full predictive draws f(x*, z*; W) + eps in original units."""
    means = predictive_mean_draws(model, x_star, S, stream)
    var = predictive_noise_var(model)
    eps = stream.standard_normal(means.shape) * np.sqrt(var)
    return means + eps


def test_metrics(model, test_set, S, stream, chunk=200):
    """Mixture-of-Gaussians test metrics in original units.

    Per point: LL = log mean_s N(y | mean_s, Sigma); RMSE uses the average
    of the S predictive mean draws.  Test points are processed in chunks so
    large S stays within memory.  Returns overall values plus the
    per-output-dimension breakdown.
    """
    if S < 2:
        raise ValueError("need S >= 2 predictive samples")
    var = predictive_noise_var(model)
    n, k_out = test_set.Y.shape

    def _mix_ll(lp):
        m = lp.max(axis=0)
        return m + np.log(np.mean(np.exp(lp - m), axis=0))

    ll_joint = np.empty(n)
    ll_per_dim = np.empty((n, k_out))
    sq = np.empty((n, k_out))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        means = predictive_mean_draws(model, test_set.X[lo:hi], S, stream)
        y = test_set.Y[lo:hi]
        logp_dim = gaussian_log_pdf_np(y, means, var)             # (S, c, K_out)
        ll_joint[lo:hi] = _mix_ll(logp_dim.sum(axis=2))
        ll_per_dim[lo:hi] = _mix_ll(logp_dim)
        sq[lo:hi] = (means.mean(axis=0) - y) ** 2
    return {
        "mse": float(sq.mean()),
        "rmse": float(np.sqrt(sq.mean())),
        "ll": float(ll_joint.mean()),
        "mse_dim": sq.mean(axis=0),
        "rmse_dim": np.sqrt(sq.mean(axis=0)),
        "ll_dim": ll_per_dim.mean(axis=0),
    }
