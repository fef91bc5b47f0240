import json
import os

import numpy as np
import pytest

from cpgan.cli import (EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE, main)
from cpgan.training import load_checkpoint

from test_data import write_idx_images, write_idx_labels


def small_config_dict(**overrides):
    base = {
        "kappa": 0.1, "gamma": 0.1, "lr_gen": 1e-3, "lr_disc": 1e-3,
        "batch_size": 32, "epochs": 2, "penalty_samples": 8,
        "reinit_policy": {"type": "none"},
        "seed": 0, "source_domain": "unit_box", "activation": "recu",
        "gen_hidden": [4, 4], "disc_hidden": [8],
        "monitor_points": 16, "monitor_eig_points": 8, "checkpoint_every": 0,
        "dataset": {"type": "gmm", "n_samples": 128, "radius": 0.2,
                    "variance": 0.01},
    }
    base.update(overrides)
    return base


@pytest.fixture()
def trained_run(tmp_path):
    cfg_path = str(tmp_path / "config.json")
    with open(cfg_path, "w") as f:
        json.dump(small_config_dict(), f)
    out = str(tmp_path / "run")
    code = main(["train", "--config", cfg_path, "--out", out])
    assert code == EXIT_OK
    return out


def test_train_produces_outputs(trained_run):
    assert os.path.exists(os.path.join(trained_run, "metrics.csv"))
    assert os.path.exists(os.path.join(trained_run, "checkpoint_final.bin"))
    samples = np.loadtxt(os.path.join(trained_run, "samples.csv"),
                         delimiter=",", ndmin=2)
    assert samples.shape == (2000, 2)


def test_train_rejects_bad_config(tmp_path, capsys):
    cfg_path = str(tmp_path / "config.json")
    with open(cfg_path, "w") as f:
        json.dump(small_config_dict(surprise=1), f)
    code = main(["train", "--config", cfg_path, "--out", str(tmp_path / "o")])
    assert code == EXIT_USAGE
    assert "surprise" in capsys.readouterr().err


def test_train_missing_config_file(tmp_path):
    code = main(["train", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "o")])
    assert code != EXIT_OK


def test_generate_from_checkpoint(trained_run, tmp_path):
    out_csv = str(tmp_path / "gen.csv")
    code = main(["generate",
                 "--checkpoint", os.path.join(trained_run, "checkpoint_final.bin"),
                 "--n", "50", "--out", out_csv])
    assert code == EXIT_OK
    pts = np.loadtxt(out_csv, delimiter=",", ndmin=2)
    assert pts.shape == (50, 2)


def test_generate_deterministic_per_seed(trained_run, tmp_path):
    ckpt = os.path.join(trained_run, "checkpoint_final.bin")
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    main(["generate", "--checkpoint", ckpt, "--n", "20", "--seed", "5", "--out", a])
    main(["generate", "--checkpoint", ckpt, "--n", "20", "--seed", "5", "--out", b])
    assert open(a).read() == open(b).read()


def test_verify_convexity_exit_codes(trained_run, capsys):
    ckpt = os.path.join(trained_run, "checkpoint_final.bin")
    code = main(["verify-convexity", "--checkpoint", ckpt, "--points", "50",
                 "--kappa", "1e9"])
    assert code == EXIT_CHECK_FAILED
    out = capsys.readouterr().out
    assert "min_eigenvalue_estimate" in out
    assert "certificate: FAIL" in out


def test_verify_convexity_usage_error(trained_run):
    ckpt = os.path.join(trained_run, "checkpoint_final.bin")
    code = main(["verify-convexity", "--checkpoint", ckpt, "--points", "0"])
    assert code == EXIT_USAGE


def test_probe_writes_eval_csv(trained_run, tmp_path):
    ckpt = os.path.join(trained_run, "checkpoint_final.bin")
    data_csv = os.path.join(trained_run, "samples.csv")
    code = main(["probe", "--checkpoint", ckpt, "--data", data_csv,
                 "--out", str(tmp_path / "probe"),
                 "--dump-potential-grid", "8"])
    assert code == EXIT_OK
    rows = open(str(tmp_path / "probe" / "eval.csv")).read().splitlines()
    assert rows[0] == "metric,value"
    names = {r.split(",")[0] for r in rows[1:]}
    assert {"disc_mean_real", "disc_mean_fake", "js_divergence",
            "min_eigenvalue_estimate"} <= names
    grid = np.loadtxt(str(tmp_path / "probe" / "potential_grid.csv"),
                      delimiter=",", ndmin=2)
    assert grid.shape == (64, 3)


def test_train_idx_dataset(tmp_path):
    rng = np.random.default_rng(0)
    imgs = rng.integers(0, 256, size=(40, 4, 4)).astype(np.uint8)
    labels = rng.integers(0, 3, size=40).astype(np.uint8)
    data_dir = str(tmp_path / "data")
    os.makedirs(data_dir)
    write_idx_images(os.path.join(data_dir, "images.idx"), imgs)
    write_idx_labels(os.path.join(data_dir, "labels.idx"), labels)
    cfg = small_config_dict(
        epochs=1, source_domain="symmetric_box",
        gen_hidden=[4], disc_hidden=[4], monitor_eig_points=0,
        dataset={"type": "idx", "keep_class": 1, "limit": 20},
    )
    cfg_path = str(tmp_path / "config.json")
    with open(cfg_path, "w") as f:
        json.dump(cfg, f)
    out = str(tmp_path / "run")
    code = main(["train", "--config", cfg_path, "--out", out,
                 "--data", data_dir])
    assert code == EXIT_OK
    manifest, _ = load_checkpoint(os.path.join(out, "checkpoint_final.bin"))
    assert manifest["config"]["dataset"]["type"] == "idx"


def test_cli_overrides_seed_and_epochs(tmp_path):
    cfg_path = str(tmp_path / "config.json")
    with open(cfg_path, "w") as f:
        json.dump(small_config_dict(), f)
    out = str(tmp_path / "run")
    code = main(["train", "--config", cfg_path, "--out", out,
                 "--seed", "7", "--epochs", "1"])
    assert code == EXIT_OK
    manifest, _ = load_checkpoint(os.path.join(out, "checkpoint_final.bin"))
    assert manifest["config"]["seed"] == 7
    assert manifest["config"]["epochs"] == 1
    assert manifest["epoch"] == 1


def test_unknown_subcommand_is_usage_error():
    assert main(["frobnicate"]) == EXIT_USAGE
