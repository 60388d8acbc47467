import math

import numpy as np
import pytest

from alphabnn.baselines import MlpConfig, freeze_z_option, train_mlp, vb_preset
from alphabnn.bnn import BnnArchitecture, ModelHyperparams
from alphabnn.bnn import test_metrics as model_metrics
from alphabnn.bnn import predictive_mean_draws, predictive_noise_var
from alphabnn.environments import Dataset
from alphabnn.rng import RngStream, gaussian_log_pdf_np


def linear_dataset(n=100, noise=0.0, seed=50):
    stream = RngStream(seed, 0)
    x = stream.uniform(-2.0, 2.0, (n, 2))
    y = x @ np.array([[1.5], [-0.7]]) + 0.3
    if noise:
        y = y + noise * stream.standard_normal(y.shape)
    return Dataset(X=x, Y=y)


class TestPresets:
    def test_vb_preset_sets_alpha_only(self):
        hyper = ModelHyperparams(alpha=0.5, K=17, learning_rate=0.003)
        vb = vb_preset(hyper)
        assert vb.alpha == 1e-6
        assert vb.K == 17 and vb.learning_rate == 0.003
        assert hyper.alpha == 0.5          # original untouched

    def test_freeze_z_sets_flag_only(self):
        hyper = ModelHyperparams(alpha=0.5, learn_z=True, K=9)
        frozen = freeze_z_option(hyper)
        assert frozen.learn_z is False
        assert frozen.K == 9 and frozen.alpha == 0.5


class TestTrainMlp:
    def test_fits_noiseless_linear_data(self):
        ds = linear_dataset(n=200)
        arch = BnnArchitecture(input_dim=2, output_dim=1, hidden=(8,))
        cfg = MlpConfig(epochs=300, batch_size=50, learning_rate=0.01)
        model = train_mlp(ds, arch, cfg, RngStream(51, 0))
        # realizable target: tiny validation MSE and fitted noise
        assert model.loss_trace[-1] < 1e-4
        assert np.all(predictive_noise_var(model) <= 1e-4 + 1e-8)

    def test_rejects_tiny_dataset(self):
        ds = linear_dataset(n=5)
        arch = BnnArchitecture(input_dim=2, output_dim=1, hidden=(4,))
        with pytest.raises(ValueError, match="10 rows"):
            train_mlp(ds, arch, MlpConfig(epochs=1), RngStream(52, 0))

    def test_point_mass_predictions_are_deterministic(self):
        ds = linear_dataset(n=60, noise=0.1)
        arch = BnnArchitecture(input_dim=2, output_dim=1, hidden=(4,))
        model = train_mlp(ds, arch, MlpConfig(epochs=20, batch_size=30),
                          RngStream(53, 0))
        x = np.array([[0.5, -0.5]])
        draws = predictive_mean_draws(model, x, 16, RngStream(54, 0))
        assert np.allclose(draws, draws[0], atol=1e-8)

    def test_seed_reproducibility(self):
        ds = linear_dataset(n=60, noise=0.1)
        arch = BnnArchitecture(input_dim=2, output_dim=1, hidden=(4,))
        cfg = MlpConfig(epochs=10, batch_size=30)
        m1 = train_mlp(ds, arch, cfg, RngStream(55, 0))
        m2 = train_mlp(ds, arch, cfg, RngStream(55, 0))
        for a, b in zip(m1.posterior.weight_means, m2.posterior.weight_means):
            assert a.tobytes() == b.tobytes()

    def test_gaussian_predictive_integrates_to_one(self):
        ds = linear_dataset(n=80, noise=0.3)
        arch = BnnArchitecture(input_dim=2, output_dim=1, hidden=(4,))
        model = train_mlp(ds, arch, MlpConfig(epochs=30, batch_size=40),
                          RngStream(56, 0))
        mean = predictive_mean_draws(model, np.array([[0.2, 0.1]]), 2,
                                     RngStream(57, 0))[0, 0, 0]
        var = predictive_noise_var(model)[0]
        grid = np.linspace(mean - 12 * math.sqrt(var), mean + 12 * math.sqrt(var),
                           100_000)
        dens = np.exp(gaussian_log_pdf_np(grid, mean, var))
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)

    def test_metrics_pipeline_shared_with_bnn(self):
        ds = linear_dataset(n=80, noise=0.2)
        arch = BnnArchitecture(input_dim=2, output_dim=1, hidden=(6,))
        model = train_mlp(ds, arch, MlpConfig(epochs=50, batch_size=40),
                          RngStream(58, 0))
        test_set = linear_dataset(n=40, noise=0.2, seed=59)
        m = model_metrics(model, test_set, 8, RngStream(60, 0))
        assert np.isfinite(m["ll"]) and m["mse"] < 0.2
