import csv

import numpy as np
import pytest

from fairselect.datagen import GeneratorSpec, KIND_DISPARATE_ERROR, KIND_DISPARATE_UTILITY
from fairselect.experiment import (ExperimentConfig, ResultRow, ResultTable,
                                   read_results, render_csv, run_experiment,
                                   run_trial, write_per_trial, write_results)


def small_config(**overrides):
    base = dict(
        generator=GeneratorSpec(kind=KIND_DISPARATE_ERROR, m=60, n=12, seed=0),
        sweep_kind="alpha_grid", grid=(0.0, 1.0),
        algorithms=("Blind", "FairExpec", "Thrsh"),
        trials=6, n=12, m=60, target="EqualRepresentation",
        delta=0.05, seed=11,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_roundtrip(tmp_path):
    cfg = small_config()
    path = tmp_path / "cfg.json"
    from fairselect.experiment import load_config, save_config
    save_config(cfg, path)
    again = load_config(path)
    assert again.to_dict() == cfg.to_dict()


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(sweep_kind="beta_grid")
    with pytest.raises(ValueError):
        small_config(grid=())
    with pytest.raises(ValueError):
        small_config(trials=0)
    with pytest.raises(ValueError):
        small_config(algorithms=("Blind", "Oops"))


def test_run_trial_reports_all_metrics():
    cfg = small_config()
    res = run_trial(cfg, 0, 0)
    assert set(res) == set(cfg.algorithms)
    for vals in res.values():
        assert set(vals) == {"risk_difference", "selection_lift",
                             "utility_ratio", "max_violation"}
        assert all(v is not None for v in vals.values())


def test_blind_utility_ratio_is_one():
    table = run_experiment(small_config(algorithms=("Blind",), trials=3))
    for g in (0.0, 1.0):
        assert table.mean_of(g, "Blind", "utility_ratio") == pytest.approx(1.0)


def test_single_trial_has_zero_sem():
    table = run_experiment(small_config(algorithms=("Blind",), trials=1))
    for row in table.rows:
        if row.metric != "excluded_trials":
            assert row.sem == 0.0


def test_rows_ordered_and_complete():
    cfg = small_config(trials=2)
    table = run_experiment(cfg)
    expected = []
    for g in cfg.grid:
        for alg in cfg.algorithms:
            for metric in ("risk_difference", "selection_lift", "utility_ratio",
                           "max_violation", "excluded_trials"):
                expected.append((g, alg, metric))
    assert [(r.grid, r.algorithm, r.metric) for r in table.rows] == expected


def test_reproducible_and_parallelism_invariant(tmp_path):
    cfg = small_config(trials=4)
    t1 = run_experiment(cfg, workers=1)
    t2 = run_experiment(cfg, workers=1)
    t3 = run_experiment(cfg, workers=2)
    p1, p2, p3 = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    write_results(t1, p1)
    write_results(t2, p2)
    write_results(t3, p3)
    assert p1.read_bytes() == p2.read_bytes() == p3.read_bytes()


def test_workers_env_variable(tmp_path, monkeypatch):
    cfg = small_config(trials=2)
    base = run_experiment(cfg, workers=1)
    monkeypatch.setenv("FAIRSELECT_WORKERS", "2")
    from_env = run_experiment(cfg)
    assert from_env == base


def test_aggregation_matches_per_trial_dump(tmp_path):
    cfg = small_config(trials=5)
    table = run_experiment(cfg)
    path = tmp_path / "per_trial.csv"
    write_per_trial(table, path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        values = {}
        for rec in reader:
            if rec["value"] == "NA":
                continue
            key = (float(rec["grid"]), rec["algorithm"], rec["metric"])
            values.setdefault(key, []).append(float(rec["value"]))
    for row in table.rows:
        if row.metric == "excluded_trials" or row.mean is None:
            continue
        vals = values[(row.grid, row.algorithm, row.metric)]
        assert row.mean == pytest.approx(np.mean(vals), abs=1e-9)
        expect_sem = np.std(vals, ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
        assert row.sem == pytest.approx(expect_sem, abs=1e-9)


def test_infeasible_trials_recorded_not_fatal():
    # delta=0 with alpha=1 on a tiny pool makes some equal-representation
    # draws infeasible for Thrsh; they must show up as exclusions
    cfg = small_config(
        generator=GeneratorSpec(kind=KIND_DISPARATE_ERROR, m=12, n=8, seed=0),
        m=12, n=8, trials=12, delta=0.0, grid=(1.0,),
        algorithms=("Thrsh", "FairExpec"))
    table = run_experiment(cfg)
    excluded = table.mean_of(1.0, "Thrsh", "excluded_trials")
    assert excluded >= 1
    rd = table.mean_of(1.0, "Thrsh", "risk_difference")
    assert rd is None or 0.0 <= rd <= 1.0


def test_tau_sweep_uses_disparate_utility_pipeline():
    cfg = ExperimentConfig(
        generator=GeneratorSpec(kind=KIND_DISPARATE_UTILITY, m=300, n=30, seed=0),
        sweep_kind="tau_grid", grid=(0.0, 0.4),
        algorithms=("FairExpec", "FairExpecGrp"),
        trials=3, n=30, m=300, target="Proportional", delta=0.02, seed=5)
    table = run_experiment(cfg)
    for g in (0.0, 0.4):
        for alg in cfg.algorithms:
            rd = table.mean_of(g, alg, "risk_difference")
            assert 0.0 <= rd <= 1.0


def test_n_sweep():
    cfg = small_config(sweep_kind="n_grid", grid=(6.0, 12.0),
                       algorithms=("Blind",), trials=2)
    table = run_experiment(cfg)
    assert table.mean_of(6.0, "Blind", "utility_ratio") == pytest.approx(1.0)


# --- results serialization -------------------------------------------------

def test_empty_table_csv():
    assert render_csv(ResultTable(rows=())) == "grid,algorithm,metric,mean,sem\n"


def test_one_row_csv_roundtrip(tmp_path):
    table = ResultTable(rows=(ResultRow(0.5, "Blind", "risk_difference", 0.8125, 0.01),))
    path = tmp_path / "one.csv"
    write_results(table, path)
    text = path.read_text()
    assert text.splitlines()[0] == "grid,algorithm,metric,mean,sem"
    assert len(text.splitlines()) == 2
    again = read_results(path)
    assert again.rows[0].mean == pytest.approx(0.8125)


def test_json_roundtrip_identity(tmp_path):
    cfg = small_config(trials=2)
    table = run_experiment(cfg)
    path = tmp_path / "res.json"
    write_results(table, path, format="json")
    again = read_results(path, format="json")
    assert again == table


def test_na_serialization(tmp_path):
    table = ResultTable(rows=(ResultRow(1.0, "Thrsh", "risk_difference", None, None),))
    path = tmp_path / "na.csv"
    write_results(table, path)
    assert "NA,NA" in path.read_text()
    again = read_results(path)
    assert again.rows[0].mean is None


def test_csv_six_significant_digits(tmp_path):
    table = ResultTable(rows=(ResultRow(0.0, "Blind", "risk_difference",
                                        0.123456789, 0.000123456789),))
    path = tmp_path / "digits.csv"
    write_results(table, path)
    line = path.read_text().splitlines()[1]
    assert line == "0,Blind,risk_difference,0.123457,0.000123457"
