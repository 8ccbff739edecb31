import json
import os

import pandas as pd
import pytest

from cli import EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, main

SIMULATE = {"n_points": 300, "grid_cells": 24, "range_km": 80.0, "coefficients": [2.0, 0.0],
            "n_env_features": 2, "seed": 3}


def write_config(tmp_path, **overrides):
    payload = {
        "name": "cli",
        "simulate": SIMULATE,
        "temporal_split": {"train_years": [2007, 2018], "test_years": [2003, 2006]},
        "schemes": [{"name": "rnd", "kind": "random", "k": 3}],
        "learners": [{"name": "rf", "space": {"n_trees": {"low": 3, "high": 5}, "max_depth": {"low": 2, "high": 3}}}],
        "n_configs": 2,
    }
    payload.update(overrides)
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(payload))
    return str(path)


def test_run_exits_ok(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", write_config(tmp_path), "--out", str(out)]) == EXIT_OK
    assert (out / "manifest.json").exists()


def test_run_with_a_failing_cell_exits_partial(tmp_path):
    schemes = [{"name": "rnd", "kind": "random", "k": 3},
               {"name": "huge", "kind": "spatial", "k": 4, "block_km": 10000}]
    out = tmp_path / "out"
    assert main(["run", "--config", write_config(tmp_path, schemes=schemes), "--out", str(out)]) == EXIT_PARTIAL


def test_missing_config_is_fatal(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_FATAL


def test_invalid_config_is_fatal(tmp_path):
    path = write_config(tmp_path, schemes=[{"name": "sp", "kind": "spatial", "k": 3}])
    assert main(["run", "--config", path, "--out", str(tmp_path / "out")]) == EXIT_FATAL


def test_usage_error_exits_one():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_FATAL


def test_simulate_writes_dataset(tmp_path):
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(SIMULATE))
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == EXIT_OK
    frame = pd.read_csv(tmp_path / "dataset.csv")
    assert len(frame) == 300
    assert list(frame.columns)[:5] == ["id", "lon", "lat", "year", "label"]


def test_thin_writes_retained_ids(tmp_path):
    config = write_config(tmp_path)
    assert main(["thin", "--config", config, "--out", str(tmp_path), "--min-dist-m", "5000"]) == EXIT_OK
    kept = pd.read_csv(tmp_path / "thinned_ids.csv")
    assert 0 < len(kept) <= 300


def test_split_writes_plans(tmp_path):
    config = write_config(tmp_path)
    assert main(["split", "--config", config, "--out", str(tmp_path)]) == EXIT_OK
    assert os.path.exists(tmp_path / "plans" / "rnd.csv")


def test_tune_writes_best_configs(tmp_path):
    config = write_config(tmp_path)
    assert main(["tune", "--config", config, "--out", str(tmp_path), "--only", "learner=rf"]) == EXIT_OK
    best = json.loads((tmp_path / "best.json").read_text())
    assert best["theta_star"]["rnd/rf"]["config_id"] in (1, 2)


def test_report_on_empty_directory_is_fatal(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == EXIT_FATAL
