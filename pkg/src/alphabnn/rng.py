"""Seeded, counter-based random streams and stochastic-node primitives.

A stream is identified by (master_seed, stream_id) and keyed into a Philox
counter-based generator, so independent streams can be handed to parallel
Monte-Carlo samples without any ordering dependence.  The stream counter
counts consumed 64-bit words: replaying from a recorded (seed, id, counter)
state reproduces the identical sequence.

Normal variates use the inverse-CDF transform of a 53-bit uniform
(scipy.special.ndtri), so every draw consumes exactly one word and replay
is exact.  This transform is part of the on-disk reproducibility contract;
do not swap it for ziggurat/polar sampling.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from . import autodiff as ad
from .autodiff import Tensor

_INV_2_52 = 2.0 ** -52


class RngStream:
    """Single-owner random stream with explicit replay state."""

    def __init__(self, master_seed, stream_id=0, counter=0):
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.counter = 0
        self._bitgen = np.random.Philox(key=(self.master_seed, self.stream_id))
        if counter:
            self.advance(counter)

    def substream(self, stream_id):
        """Derive an independent stream under the same master seed."""
        return RngStream(self.master_seed, stream_id)

    def advance(self, n):
        # Philox.advance counts 4-word blocks and snaps to a block boundary,
        # so burn any partial block word-by-word to keep the counter exact
        # in 64-bit-word units.
        n = int(n)
        remaining = n
        partial = -self.counter % 4
        if partial:
            burn = min(partial, remaining)
            self._bitgen.random_raw(burn)
            remaining -= burn
        blocks, rem = divmod(remaining, 4)
        if blocks:
            self._bitgen.advance(blocks)
        if rem:
            self._bitgen.random_raw(rem)
        self.counter += n

    def state(self):
        return (self.master_seed, self.stream_id, self.counter)

    def _words(self, n):
        raw = self._bitgen.random_raw(n)
        self.counter += int(n)
        return raw

    def uniform01(self, shape=()):
        """Open-interval (0, 1) uniforms; one 64-bit word per value."""
        n = int(np.prod(shape)) if shape else 1
        u = ((self._words(n) >> np.uint64(12)).astype(np.float64) + 0.5) * _INV_2_52
        return u.reshape(shape) if shape else float(u[0])

    def uniform(self, a, b, shape=None):
        """Uniform draw(s) on [a, b)."""
        if not a < b:
            raise ValueError(f"uniform: need a < b, got a={a}, b={b}")
        if shape is None:
            n = int(self._words(1)[0] >> np.uint64(11))
            return a + (b - a) * (n * 2.0 ** -53)
        u = (self._words(int(np.prod(shape))) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return (a + (b - a) * u).reshape(shape)

    def standard_normal(self, shape=()):
        u = self.uniform01(shape if shape else (1,))
        z = ndtri(u)
        return z.reshape(shape) if shape else float(z[0])


# ---------------------------------------------------------------------------
# differentiable distribution primitives

LOG_2PI = float(np.log(2.0 * np.pi))


def sample_standard_normal(stream, shape):
    """i.i.d. N(0,1) draws as a constant (non-trainable) tensor."""
    return Tensor(stream.standard_normal(shape))


def reparam_sample(m, v, eps):
    """m + sqrt(v) * eps as a differentiable node (gradients reach m and v)."""
    m, v, eps = ad._lift(m), ad._lift(v), ad._lift(eps)
    if np.any(v.data <= 0.0):
        raise ad.DomainError("reparam_sample: variance must be positive")
    return m + ad.sqrt(v) * eps


def gaussian_log_pdf(y, mean, var):
    """Elementwise log N(y | mean, var)."""
    y, mean, var = ad._lift(y), ad._lift(mean), ad._lift(var)
    if np.any(var.data <= 0.0):
        raise ad.DomainError("gaussian_log_pdf: variance must be positive")
    diff = y - mean
    return -0.5 * (LOG_2PI + ad.log(var)) - ad.square(diff) / (2.0 * var)


def gaussian_log_pdf_np(y, mean, var):
    """Plain-numpy twin of gaussian_log_pdf for non-graph evaluation."""
    return -0.5 * (LOG_2PI + np.log(var)) - (y - mean) ** 2 / (2.0 * var)


def log_mean_exp(values, axis=0):
    """log of the sample average along ``axis``, computed max-shifted."""
    values = ad._lift(values)
    k = values.data.shape[axis % values.data.ndim]
    if k == 0:
        raise ValueError("log_mean_exp: empty axis")
    return ad.logsumexp_axis(values, axis=axis) - float(np.log(k))
