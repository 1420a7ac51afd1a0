import csv
import json

import pytest

from gnn_watermark.cli import EXIT_OK, main
from gnn_watermark.experiments import CSV_HEADERS, ExperimentConfig, run_report, run_seed, trigger_key
from gnn_watermark.keyed_rand import derive_seed

SMOKE = {
    "key": "smoke-key",
    "synthetic": {"num_nodes": 120, "num_classes": 3, "d": 24, "homophily": 0.8, "seed": 2},
    "grid": {"n": [5], "p_g": [0.0, 0.2], "p_r": [0.1]},
    "attacks": {"pruning_rates": [0.0, 0.5], "finetune_epochs": [2]},
    "repetitions": 1,
    "train": {"epochs": 4, "hidden_dim": 8},
}


def read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_smoke_grid_emits_all_tables(tmp_path):
    paths = run_report(ExperimentConfig.from_dict(SMOKE), tmp_path)
    assert set(CSV_HEADERS) <= set(paths)
    for table, header in CSV_HEADERS.items():
        rows = read(tmp_path / f"{table}.csv")
        assert rows[0] == header
        assert any(r[header.index("run")] == "mean" for r in rows[1:])
    fidelity = read(tmp_path / "fidelity.csv")[1:]
    # baseline plus one marked row per grid point, each followed by its mean row
    assert sum(r[4] == "0" for r in fidelity) == 3
    pruning = read(tmp_path / "pruning.csv")[1:]
    assert {r[4] for r in pruning} == {"0.0", "0.5"} and all(r[2] == "0.0" for r in pruning)
    sens = read(tmp_path / "sensitivity.csv")[1:]
    assert {r[4] for r in sens} == {"0", "1"}
    assert not (tmp_path / "errors.csv").exists()


def test_rerun_is_byte_identical(tmp_path):
    cfg = ExperimentConfig.from_dict(SMOKE)
    run_report(cfg, tmp_path / "a")
    run_report(cfg, tmp_path / "b")
    for table in CSV_HEADERS:
        assert (tmp_path / "a" / f"{table}.csv").read_bytes() == (tmp_path / "b" / f"{table}.csv").read_bytes()


@pytest.mark.slow
def test_parallel_matches_serial(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMOKE, "repetitions": 2, "sensitivity": False})
    run_report(cfg, tmp_path / "serial", workers=1)
    run_report(cfg, tmp_path / "parallel", workers=2)
    for table in CSV_HEADERS:
        assert (tmp_path / "serial" / f"{table}.csv").read_bytes() == \
            (tmp_path / "parallel" / f"{table}.csv").read_bytes()


def test_failed_point_records_error_row(tmp_path):
    # p_r outside [0, 1] fails inside the grid; the baseline and other points still run
    cfg = ExperimentConfig.from_dict({**SMOKE, "grid": {"n": [5], "p_g": [0.0], "p_r": [0.1, 1.5]}})
    paths = run_report(cfg, tmp_path)
    errors = read(paths["errors"])
    assert len(errors) == 2 and errors[1][4] == "1.5"
    assert len(read(tmp_path / "fidelity.csv")) > 1


def test_seeds_per_run():
    assert run_seed("k", 0, 3) == derive_seed("k", "run-3")
    assert run_seed("k", 5, 0) == derive_seed("k", "run-5")
    assert trigger_key("k", 0, 2) != trigger_key("k", 0, 3)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"grid": {"n": []}})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"repetitions": 0})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})
    cfg = ExperimentConfig()
    assert cfg.n == [10, 50, 100] and cfg.repetitions == 10
    assert cfg.pruning_rates == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def test_report_command(tmp_path):
    (tmp_path / "exp.json").write_text(json.dumps(SMOKE))
    assert main(["report", "--config", str(tmp_path / "exp.json"), "--out", str(tmp_path / "out")]) == EXIT_OK
    assert (tmp_path / "out" / "finetune.csv").exists()
