"""End-to-end tests for the command-line interface.

Everything here runs through ``cli.main(argv)`` with tiny configs so the
whole module stays fast; heavier numerical behaviour is covered by the
per-module suites.
"""

import json
import os

import numpy as np
import pytest

from alphabnn import checkpoint as ckpt
from alphabnn import cli
from alphabnn import config as cfgmod
from alphabnn import environments as envs


def tiny_config(tmp_path, method="alpha"):
    cfg = cfgmod.default_config("wet-chicken", method, 0.5, 0)
    cfg.model.hidden = (5,)
    cfg.model.K = 5
    cfg.model.batch_size = 30
    cfg.model.epochs = 2
    cfg.policy.horizon = 2
    cfg.policy.samples = 2
    cfg.policy.batch_size = 2
    cfg.policy.epochs = 2
    path = str(tmp_path / f"{method}.cfg")
    cfgmod.save(cfg, path)
    return path


def gen_data(tmp_path, name="train.csv", n=60, seed=0):
    out = str(tmp_path / name)
    rc = cli.main(["gen-data", "wet-chicken-trajectory", str(n),
                   "--seed", str(seed), "--out", out])
    assert rc == 0
    return out


def train_tiny_model(tmp_path, method="alpha"):
    data = gen_data(tmp_path)
    out = str(tmp_path / f"{method}.ckpt")
    rc = cli.main(["train-model", "--data", data, "--out", out,
                   "--config", tiny_config(tmp_path, method),
                   "--method", method, "--seed", "0"])
    assert rc == 0
    return data, out


# ---------------------------------------------------------------------------
# gen-data


def test_gen_data_row_count_and_meta(tmp_path):
    out = gen_data(tmp_path, n=45)
    ds = envs.read_csv(out)
    assert ds.n == 45
    assert ds.X.shape == (45, 4)
    assert ds.Y.shape == (45, 2)
    assert ds.meta["x_columns"] == ["x", "y", "ax", "ay"]
    assert ds.meta["y_columns"] == ["dx", "dy"]


def test_gen_data_seed_replay_is_byte_identical(tmp_path):
    a = gen_data(tmp_path, "a.csv", seed=7)
    b = gen_data(tmp_path, "b.csv", seed=7)
    c = gen_data(tmp_path, "c.csv", seed=8)
    with open(a, "rb") as fa, open(b, "rb") as fb, open(c, "rb") as fc:
        ba, bb, bc = fa.read(), fb.read(), fc.read()
    assert ba == bb
    assert ba != bc


def test_gen_data_all_generators(tmp_path):
    for name in sorted(envs.GENERATORS):
        out = str(tmp_path / f"{name}.csv")
        assert cli.main(["gen-data", name, "20", "--out", out]) == 0
        assert envs.read_csv(out).n == 20


def test_gen_data_rejects_unknown_benchmark(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen-data", "nope", "10", "--out", str(tmp_path / "x.csv")])
    assert exc.value.code == 2


def test_manifest_written_with_digests(tmp_path):
    out = gen_data(tmp_path)
    man_path = out + ".manifest.json"
    assert os.path.exists(man_path)
    with open(man_path) as fh:
        man = json.load(fh)
    assert man["command"] == "gen-data"
    assert man["master_seed"] == 0
    assert out in man["outputs"]
    assert len(man["outputs"][out]) == 64  # sha256 hex
    assert "finished_at" in man


def test_output_root_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("ALPHABNN_OUTPUT_ROOT", str(tmp_path / "root"))
    assert cli.main(["gen-data", "toy-bimodal", "10", "--out", "rel.csv"]) == 0
    assert os.path.exists(tmp_path / "root" / "rel.csv")


# ---------------------------------------------------------------------------
# train-model / eval-model


def test_train_model_smoke(tmp_path):
    _, out = train_tiny_model(tmp_path)
    ckpt.load_model(out)
    with open(out + ".trace.csv") as fh:
        lines = fh.read().strip().splitlines()
    assert lines[0] == "epoch,energy"
    assert len(lines) == 3  # one row per epoch
    with open(out + ".manifest.json") as fh:
        man = json.load(fh)
    assert man["config"]["experiment"]["alpha"] == 0.5
    assert man["inputs"]  # training data digest recorded


def test_train_model_vb_forces_alpha(tmp_path):
    _, out = train_tiny_model(tmp_path, method="vb")
    with open(out + ".manifest.json") as fh:
        man = json.load(fh)
    assert man["config"]["experiment"]["alpha"] == 1e-6


def test_train_model_missing_data(tmp_path, capsys):
    rc = cli.main(["train-model", "--data", str(tmp_path / "no.csv"),
                   "--out", str(tmp_path / "m.ckpt")])
    assert rc == 3
    assert capsys.readouterr().err.startswith("error:missing-input:")


def test_train_model_bad_config(tmp_path, capsys):
    data = gen_data(tmp_path)
    bad = tmp_path / "bad.cfg"
    bad.write_text("[model]\nnot_a_key = 3\n")
    rc = cli.main(["train-model", "--data", data, "--config", str(bad),
                   "--out", str(tmp_path / "m.ckpt")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:config:")


def test_eval_model_metrics_schema(tmp_path, capsys):
    data, model = train_tiny_model(tmp_path)
    out = str(tmp_path / "metrics.csv")
    rc = cli.main(["eval-model", "--checkpoint", model, "--test", data,
                   "--samples", "20", "--method-name", "alpha=0.5",
                   "--out", out])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[-2] == "method,seed,mse,ll,mse_y,ll_y"
    fields = lines[-1].split(",")
    assert fields[0] == "alpha=0.5" and fields[1] == "0"
    assert all(np.isfinite(float(v)) for v in fields[2:])
    # repeated eval appends a row without duplicating the header
    assert cli.main(["eval-model", "--checkpoint", model, "--test", data,
                     "--samples", "20", "--out", out]) == 0
    with open(out) as fh:
        rows = fh.read().strip().splitlines()
    assert len(rows) == 3 and rows[0] == "method,seed,mse,ll,mse_y,ll_y"


def test_eval_model_replay(tmp_path, capsys):
    data, model = train_tiny_model(tmp_path)
    args = ["eval-model", "--checkpoint", model, "--test", data,
            "--samples", "20", "--seed", "3"]
    capsys.readouterr()
    assert cli.main(args) == 0
    first = capsys.readouterr().out
    assert cli.main(args) == 0
    assert capsys.readouterr().out == first


def test_eval_model_garbage_checkpoint(tmp_path, capsys):
    data = gen_data(tmp_path)
    junk = tmp_path / "junk.ckpt"
    junk.write_bytes(b"not a checkpoint at all")
    rc = cli.main(["eval-model", "--checkpoint", str(junk), "--test", data])
    assert rc == 4
    assert capsys.readouterr().err.startswith("error:runtime:")


# ---------------------------------------------------------------------------
# predictive-dump


def test_predictive_dump_schema_and_replay(tmp_path):
    _, model = train_tiny_model(tmp_path)
    out = str(tmp_path / "dump.csv")
    args = ["predictive-dump", "--checkpoint", model, "--x", "2.5",
            "--y", "2.5", "--ax", "0", "--ay", "1",
            "--samples", "50", "--out", out]
    assert cli.main(args) == 0
    with open(out) as fh:
        lines = fh.read().strip().splitlines()
    assert lines[0] == "model_sample,truth_sample"
    assert len(lines) == 51
    truth = np.array([float(l.split(",")[1]) for l in lines[1:]])
    # ground truth at (2.5, 2.5) with a_y=1: dy = 1.5 + 2*tau unless the
    # candidate crosses the waterfall, in which case dy = -2.5
    survived = (truth >= -0.5 - 1e-12) & (truth <= 2.5 + 1e-12)
    fell = np.isclose(truth, -2.5)
    assert np.all(survived | fell) and fell.any() and survived.any()
    out2 = str(tmp_path / "dump2.csv")
    assert cli.main(args[:-1] + [out2]) == 0
    with open(out) as f1, open(out2) as f2:
        assert f1.read() == f2.read()


# ---------------------------------------------------------------------------
# train-policy / eval-policy


def test_policy_pipeline(tmp_path, capsys):
    data, model = train_tiny_model(tmp_path)
    pol_out = str(tmp_path / "policy.ckpt")
    rc = cli.main(["train-policy", "--model", model, "--data", data,
                   "--out", pol_out, "--config", tiny_config(tmp_path),
                   "--seed", "0"])
    assert rc == 0
    ckpt.load_policy(pol_out)
    with open(pol_out + ".trace.csv") as fh:
        assert fh.readline().strip() == "epoch,cost"

    capsys.readouterr()
    eval_out = str(tmp_path / "policy_eval.csv")
    rc = cli.main(["eval-policy", "--policy", pol_out, "--episodes", "2",
                   "--steps", "50", "--method-name", "alpha=0.5",
                   "--out", eval_out])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "method,seed,mean_reward,stderr"
    mean = float(lines[1].split(",")[2])
    assert -5.0 <= mean <= 0.0


def test_eval_policy_missing_file(tmp_path, capsys):
    rc = cli.main(["eval-policy", "--policy", str(tmp_path / "no.ckpt")])
    assert rc == 3
    assert capsys.readouterr().err.startswith("error:missing-input:")
