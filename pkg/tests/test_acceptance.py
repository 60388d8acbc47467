"""Acceptance gate: desk-scale reproductions of the headline results.

Criteria covered, in order:

1. toy bimodal — alpha=0.5 beats VB on test log-likelihood, equal RMSE
2. toy heteroskedastic — same comparison on an input-dependent-noise task
3. Wet-Chicken transition-model quality across four methods, 5 seeds
4. Wet-Chicken policy reward from roll-out gradients, 5 seeds
5. bimodality: near-waterfall dy samples split into two populations
6. deterministic property oracles (re-run from the unit suites)

Everything here trains real models, so this module dominates the runtime of
the whole test suite (order of an hour of CPU).  Thresholds are wide enough
to hold across seeds; the per-criterion wall-clock limits are part of the
contract and are asserted too.
"""

import time

import numpy as np
import pytest

import test_bnn
import test_checkpoint
import test_environments
import test_policy

from alphabnn import experiments as exp
from alphabnn.bnn import predictive_samples
from alphabnn.rng import RngStream

SEEDS = tuple(range(5))
WC_METHODS = (("alpha", 0.5), ("alpha", 1.0), ("vb", 1e-6), ("mlp", 0.0))
POLICY_METHODS = (("alpha", 0.5), ("alpha", 1.0), ("mlp", 0.0))


def _avg(values):
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# shared training runs (module-scoped: each model is trained exactly once)


@pytest.fixture(scope="module")
def wet_chicken():
    runs = {}
    for method, alpha in WC_METHODS:
        t0 = time.time()
        per_seed = []
        for seed in SEEDS:
            cfg, train_ds, model, metrics = exp.run_model_experiment(
                "wet-chicken", method, alpha, seed)
            per_seed.append({
                "cfg": cfg, "train": train_ds, "model": model,
                "row": exp.metrics_row(method, seed, metrics),
            })
        runs[(method, alpha)] = {
            "seeds": per_seed,
            "ll_y": _avg([r["row"]["ll_y"] for r in per_seed]),
            "mse_y": _avg([r["row"]["mse_y"] for r in per_seed]),
            "model_time": time.time() - t0,
        }
        print(f"\n[acceptance] wet-chicken {exp.method_label(method, alpha)}: "
              f"ll_y {runs[(method, alpha)]['ll_y']:.3f} "
              f"mse_y {runs[(method, alpha)]['mse_y']:.3f} "
              f"({runs[(method, alpha)]['model_time']:.0f}s)", flush=True)
    return runs


@pytest.fixture(scope="module")
def wet_chicken_policies(wet_chicken):
    out = {}
    for method, alpha in POLICY_METHODS:
        t0 = time.time()
        rewards = []
        for seed, rec in zip(SEEDS, wet_chicken[(method, alpha)]["seeds"]):
            policy, _ = exp.train_policy(rec["cfg"], rec["model"],
                                         rec["train"], seed)
            mean, _, _ = exp.eval_policy(policy,
                                         rec["cfg"].evaluation.episodes,
                                         rec["cfg"].evaluation.steps, seed)
            rewards.append(mean)
        out[(method, alpha)] = {
            "rewards": rewards,
            "mean": _avg(rewards),
            "time": time.time() - t0,
        }
        print(f"\n[acceptance] policy {exp.method_label(method, alpha)}: "
              f"reward {out[(method, alpha)]['mean']:.3f} "
              f"({out[(method, alpha)]['time']:.0f}s)", flush=True)
    return out


@pytest.fixture(scope="module")
def toy_results():
    out = {}
    for bench in ("toy-bimodal", "toy-heteroskedastic"):
        t0 = time.time()
        per = {}
        for method, alpha in (("alpha", 0.5), ("alpha", 1.0), ("vb", 1e-6)):
            _, _, model, metrics = exp.run_model_experiment(
                bench, method, alpha, 0)
            per[(method, alpha)] = {"model": model, "ll": metrics["ll"],
                                    "rmse": metrics["rmse"]}
            print(f"\n[acceptance] {bench} {exp.method_label(method, alpha)}: "
                  f"ll {metrics['ll']:.3f} rmse {metrics['rmse']:.3f}",
                  flush=True)
        out[bench] = {"methods": per, "runtime": time.time() - t0}
    return out


# ---------------------------------------------------------------------------
# criterion 1: toy bimodal


def test_toy_bimodal_log_likelihood_and_rmse(toy_results):
    res = toy_results["toy-bimodal"]
    per = res["methods"]
    assert per[("alpha", 0.5)]["ll"] >= -2.4
    assert per[("vb", 1e-6)]["ll"] <= -2.8
    for rec in per.values():
        assert 4.7 <= rec["rmse"] <= 5.5
    assert res["runtime"] <= 15 * 60


# ---------------------------------------------------------------------------
# criterion 2: toy heteroskedastic


def test_toy_heteroskedastic_log_likelihood_and_rmse(toy_results):
    res = toy_results["toy-heteroskedastic"]
    per = res["methods"]
    assert per[("alpha", 0.5)]["ll"] >= -1.90
    assert per[("vb", 1e-6)]["ll"] <= -1.95
    for rec in per.values():
        assert 1.7 <= rec["rmse"] <= 2.1
    assert res["runtime"] <= 10 * 60


# ---------------------------------------------------------------------------
# criterion 3: Wet-Chicken model quality (y dimension, 5-seed averages)


def test_wet_chicken_model_quality(wet_chicken):
    ll = {k: v["ll_y"] for k, v in wet_chicken.items()}
    mse = {k: v["mse_y"] for k, v in wet_chicken.items()}
    assert -1.15 <= ll[("alpha", 0.5)] <= -0.95
    assert -1.17 <= ll[("alpha", 1.0)] <= -0.97
    assert -1.30 <= ll[("vb", 1e-6)] <= -1.00
    assert ll[("mlp", 0.0)] <= -1.6
    for key, value in mse.items():
        assert 1.2 <= value <= 1.5, (key, value)
    assert (ll[("alpha", 0.5)] >= ll[("alpha", 1.0)]
            >= ll[("vb", 1e-6)] > ll[("mlp", 0.0)])


# ---------------------------------------------------------------------------
# criterion 4: Wet-Chicken policy performance


def test_wet_chicken_policy_reward(wet_chicken_policies):
    means = {k: v["mean"] for k, v in wet_chicken_policies.items()}
    assert means[("alpha", 0.5)] >= -2.5
    assert means[("alpha", 0.5)] > means[("mlp", 0.0)]
    assert means[("alpha", 1.0)] > means[("mlp", 0.0)]
    for rec in wet_chicken_policies.values():
        assert rec["time"] <= 30 * 60


# ---------------------------------------------------------------------------
# criterion 5: bimodality evidence


def test_near_waterfall_dy_samples_are_bimodal(wet_chicken):
    # at (x, y) = (2.5, 3.5) with action (0, 0.5): v = 1.5, s = 2, so the
    # tentative y is 4.5 + 2*tau; the canoe falls iff tau > 0.25, which has
    # probability 0.375 under tau ~ Unif[-1, 1].  A fall gives dy = -3.5,
    # survival gives dy in [-1, 1.5]; split the samples at the gap midpoint.
    model = wet_chicken[("alpha", 0.5)]["seeds"][0]["model"]
    feats = np.array([[2.5, 3.5, 0.0, 0.5]])
    draws = predictive_samples(model, feats, 4000,
                               RngStream(0, exp.STREAM_EVAL))
    dy = draws[:, 0, 1]
    frac = float(np.mean(dy < -2.25))
    assert 0.05 <= frac <= 0.60
    assert abs(frac - 0.375) <= 0.15


def _two_population(samples):
    """Both toy-bimodal modes (0 and 10 at x=0) populated, empty gap between."""
    near_low = np.mean(np.abs(samples) < 3.0)
    near_high = np.mean(np.abs(samples - 10.0) < 3.0)
    gap = np.mean((samples > 3.0) & (samples < 7.0))
    return near_low >= 0.2 and near_high >= 0.2 and gap <= 0.15


def test_vb_fails_two_population_test_on_toy_bimodal(toy_results):
    per = toy_results["toy-bimodal"]["methods"]
    x = np.array([[0.0]])
    s_alpha = predictive_samples(per[("alpha", 0.5)]["model"], x, 4000,
                                 RngStream(1, exp.STREAM_EVAL))[:, 0, 0]
    s_vb = predictive_samples(per[("vb", 1e-6)]["model"], x, 4000,
                              RngStream(1, exp.STREAM_EVAL))[:, 0, 0]
    assert _two_population(s_alpha)
    assert not _two_population(s_vb)


# ---------------------------------------------------------------------------
# criterion 6: deterministic property oracles.  These live in the unit
# suites; re-run the load-bearing ones here so the acceptance module stands
# alone and stays independent of any stochastic-training variance.


def test_energy_gradients_match_finite_differences():
    test_bnn.TestEnergy().test_gradients_match_finite_differences()


def test_rollout_gradients_match_finite_differences():
    test_policy.TestUnfold().test_gradient_matches_finite_differences()


def test_energy_matches_quadrature_oracle():
    test_bnn.TestEnergy().test_quadrature_oracle_one_weight_linear_model()


def test_alpha_to_zero_limit():
    test_bnn.TestEnergy().test_vb_limit_matches_average_log_ratio()


def test_dynamics_hand_cases_exact():
    steps = test_environments.TestStep()
    steps.test_drift_into_upstream_clamp()
    steps.test_waterfall_reset()
    steps.test_plain_drift()
    steps.test_lip_exactly_survives()
    steps.test_left_clamp_before_waterfall()
    steps.test_right_clamp()


def test_seed_reproducibility_byte_exact():
    test_bnn.TestTrain().test_seed_reproducibility_is_byte_exact()
    test_policy.TestTrainPolicy().test_seed_reproducibility()


def test_checkpoint_round_trip_bit_exact(tmp_path):
    test_checkpoint.TestModelCheckpoint().test_round_trip_bit_exact(tmp_path)
    test_checkpoint.TestPolicyCheckpoint().test_round_trip_bit_exact(tmp_path)
