import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alphabnn import autodiff as ad
from alphabnn.autodiff import DomainError, Tensor, backward
from alphabnn.rng import (RngStream, gaussian_log_pdf, log_mean_exp,
                          reparam_sample, sample_standard_normal)


class TestStreams:
    def test_standard_normal_moments(self):
        z = RngStream(123).standard_normal((10**6,))
        assert abs(z.mean()) < 0.01
        assert abs(z.var() - 1.0) < 0.01

    def test_replay_from_state_is_identical(self):
        s = RngStream(9, 4)
        s.standard_normal((100,))
        state = s.state()
        a = s.standard_normal((50,))
        replay = RngStream(*state)
        b = replay.standard_normal((50,))
        assert np.array_equal(a, b)

    def test_distinct_stream_ids_uncorrelated(self):
        a = RngStream(7, 0).standard_normal((10**5,))
        b = RngStream(7, 1).standard_normal((10**5,))
        r = np.corrcoef(a, b)[0, 1]
        assert abs(r) < 0.01

    def test_uniform_bounds_and_mean(self):
        s = RngStream(55)
        draws = s.uniform(-1.0, 1.0, (10**5,))
        assert np.all(draws >= -1.0) and np.all(draws < 1.0)
        assert abs(draws.mean()) < 0.02

    def test_uniform_rejects_bad_interval(self):
        with pytest.raises(ValueError):
            RngStream(1).uniform(2.0, 2.0)

    def test_uniform_replay(self):
        s = RngStream(8, 2)
        s.uniform(0.0, 1.0, (33,))
        state = s.state()
        a = [s.uniform(-3.0, 5.0) for _ in range(20)]
        b = [RngStream(*state).uniform(-3.0, 5.0) for _ in [0]][0]
        replay = RngStream(*state)
        b = [replay.uniform(-3.0, 5.0) for _ in range(20)]
        assert a == b

    def test_counter_counts_words(self):
        s = RngStream(1)
        s.standard_normal((10,))
        s.uniform(0.0, 1.0, (5,))
        assert s.counter == 15


class TestReparam:
    def test_point_values(self):
        out = reparam_sample(Tensor(3.0), Tensor(4.0), Tensor(1.0))
        assert out.item() == pytest.approx(5.0)
        out = reparam_sample(Tensor(3.0), Tensor(4.0), Tensor(0.0))
        assert out.item() == pytest.approx(3.0)

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(DomainError):
            reparam_sample(Tensor(0.0), Tensor(0.0), Tensor(1.0))

    def test_moments_match(self):
        eps = RngStream(2).standard_normal((10**5,))
        m, v = 1.5, 0.49
        out = reparam_sample(Tensor(m), Tensor(v), Tensor(eps))
        se_mean = math.sqrt(v / eps.size)
        assert abs(out.data.mean() - m) < 3 * se_mean
        se_var = v * math.sqrt(2.0 / eps.size)
        assert abs(out.data.var() - v) < 3 * se_var

    def test_gradients_reach_mean_and_variance(self):
        m = Tensor([1.0, 2.0], requires_grad=True)
        v = Tensor([0.25, 4.0], requires_grad=True)
        eps = Tensor([0.5, -1.0])
        grads = backward(ad.sum_axis(reparam_sample(m, v, eps)))
        assert np.allclose(grads[m], [1.0, 1.0])
        # d/dv (m + sqrt(v) eps) = eps / (2 sqrt(v))
        assert np.allclose(grads[v], [0.5 / (2 * 0.5), -1.0 / (2 * 2.0)])


class TestGaussianLogPdf:
    def test_standard_normal_at_zero(self):
        out = gaussian_log_pdf(Tensor(0.0), Tensor(0.0), Tensor(1.0))
        assert out.item() == pytest.approx(-0.9189385, abs=1e-6)

    def test_zero_residual(self):
        v = 2.7
        out = gaussian_log_pdf(Tensor(4.0), Tensor(4.0), Tensor(v))
        assert out.item() == pytest.approx(-0.5 * math.log(2 * math.pi * v))

    def test_general_value(self):
        out = gaussian_log_pdf(Tensor(1.0), Tensor(0.0), Tensor(2.0))
        # -0.5*log(4*pi) - 1/4, computed by hand
        assert out.item() == pytest.approx(-1.5155121, abs=1e-6)

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(DomainError):
            gaussian_log_pdf(Tensor(0.0), Tensor(0.0), Tensor(-1.0))

    def test_integrates_to_one_by_quadrature(self):
        mean, var = 0.7, 2.3
        sd = math.sqrt(var)
        grid = np.linspace(mean - 8 * sd, mean + 8 * sd, 20001)
        dens = np.exp(gaussian_log_pdf(Tensor(grid), Tensor(mean), Tensor(var)).data)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)


class TestLogMeanExp:
    def test_constant(self):
        c = -4.2
        assert log_mean_exp(Tensor([c, c, c])).item() == pytest.approx(c)

    def test_mean_of_one_and_three(self):
        out = log_mean_exp(Tensor([0.0, math.log(3.0)]))
        assert out.item() == pytest.approx(math.log(2.0))

    def test_large_inputs_no_overflow(self):
        out = log_mean_exp(Tensor([1000.0, 1000.0]))
        assert out.item() == pytest.approx(1000.0)

    def test_empty_axis_raises(self):
        with pytest.raises(ValueError):
            log_mean_exp(Tensor(np.zeros((0,))))

    @given(st.floats(min_value=-100, max_value=100),
           st.lists(st.floats(min_value=-20, max_value=20), min_size=1, max_size=10))
    @settings(max_examples=50, deadline=None)
    def test_shift_invariance(self, c, values):
        v = np.array(values)
        lhs = log_mean_exp(Tensor(v + c)).item()
        rhs = log_mean_exp(Tensor(v)).item() + c
        assert lhs == pytest.approx(rhs, abs=1e-10 * max(1.0, abs(rhs)))


def test_sample_standard_normal_is_plain_tensor():
    t = sample_standard_normal(RngStream(1), (4, 5))
    assert t.shape == (4, 5)
    assert not t.requires_grad
