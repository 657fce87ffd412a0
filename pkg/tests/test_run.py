"""Run configuration, batch simulation, sweeps, and the command line."""
import dataclasses
import json
import math
import os

import numpy as np
import pytest

from radiokey import ConfigError, DecayParams, SourceParams, Strategy, TimelineParams
from radiokey.cli import main
from radiokey.run import (
    RunConfig,
    SWEEP_COLUMNS,
    load_config,
    run_bounds,
    run_simulation,
    run_sweep,
)


def small_config(**overrides) -> RunConfig:
    base = RunConfig(
        timeline=TimelineParams(2.0, 2.0, 120.0, DecayParams(20.0)),
        trials=5,
        master_seed=7,
    )
    return dataclasses.replace(base, **overrides) if overrides else base


# --- configuration ---------------------------------------------------------


def test_config_round_trip_identity():
    config = RunConfig()
    data = config.to_dict()
    assert RunConfig.from_dict(data).to_dict() == data


def test_config_from_partial_dict_uses_defaults():
    config = RunConfig.from_dict({"plate": {"mu": 0.2}})
    assert config.plate.source.mu == 0.2
    assert config.plate.pair_count == 2400
    assert config.scenario == "a"
    assert config.sigmas == 5.0


def test_config_rejects_unknown_fields_with_path():
    with pytest.raises(ConfigError, match="plate.mu_typo"):
        RunConfig.from_dict({"plate": {"mu_typo": 0.2}})
    with pytest.raises(ConfigError, match="unknown field"):
        RunConfig.from_dict({"unexpected": 1})
    with pytest.raises(ConfigError, match="timeline"):
        RunConfig.from_dict({"timeline": {"mean_life": -2.0}})


def test_config_validates_scenario_and_counts():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"scenario": "c"})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"trials": 0})
    with pytest.raises(ConfigError, match="strategy"):
        RunConfig.from_dict({"attack": {"strategy": "sneaky"}})


def test_config_file_round_trip(tmp_path):
    config = small_config()
    path = tmp_path / "config.json"
    path.write_text(config.to_json())
    assert load_config(path).to_dict() == config.to_dict()


def test_attack_config_parses_strategy_and_budget():
    config = RunConfig.from_dict(
        {"attack": {"strategy": "opaque", "replacement_budget": 12}}
    )
    assert config.attack.strategy is Strategy.OPAQUE
    assert config.attack.replacement_budget == 12


# --- simulation ------------------------------------------------------------


def test_run_simulation_report_is_reproducible():
    config = small_config()
    first = run_simulation(config).to_json()
    second = run_simulation(config).to_json()
    assert first == second


def test_run_simulation_independent_of_worker_count():
    serial = run_simulation(small_config(workers=1)).to_json()
    parallel = run_simulation(small_config(workers=2)).to_json()
    assert serial == parallel


def test_run_simulation_prearrival_matches_bound():
    config = small_config(trials=20)
    report = run_simulation(config)
    estimate = report.bounds.mc_prearrival
    assert estimate is not None
    assert abs(estimate.value - report.bounds.prearrival) < 4 * estimate.std_error


def test_run_simulation_zero_mu_gives_empty_keys():
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        config = small_config(
            plate=dataclasses.replace(small_config().plate, source=SourceParams(0.0)),
            trials=1,
        )
    report = run_simulation(config)
    assert report.trials[0]["raw_key_length"] == 0
    assert report.aggregate["raw_key_length"]["mean"] == 0.0


def test_run_simulation_ledger_consistency():
    report = run_simulation(small_config())
    for trial in report.trials:
        ledger = trial["ledger"]
        assert ledger is not None
        assert ledger["status"] == "OK"
        assert ledger["residual_mismatches"] == 0
        kept = trial["raw_key_length"] - ledger["disclosed_samples"]
        expected = max(
            0,
            kept
            - math.ceil(kept * ledger["eve_bound"])
            - ledger["reconciliation_leakage"]
            - ledger["security_bits"],
        )
        assert ledger["final_length"] == expected


def test_run_simulation_with_attacks_populates_estimates():
    config = small_config(
        attack=dataclasses.replace(small_config().attack, strategy=Strategy.BOTH),
        trials=3,
    )
    report = run_simulation(config)
    assert report.bounds.mc_eve_fraction is not None
    assert report.bounds.mc_translucent is not None
    assert all(t["eve_replaced"] > 0 for t in report.trials)


# --- bounds and sweeps -----------------------------------------------------


def test_run_bounds_matches_direct_evaluation():
    config = small_config()
    bounds = run_bounds(config)
    x = config.timeline.exposure_ratio
    assert bounds.prearrival == pytest.approx(1 - math.exp(-x), rel=1e-12)
    assert bounds.combined == pytest.approx(
        bounds.translucent + bounds.intercept_resend, rel=1e-12
    )


def test_sweep_single_point_equals_run_bounds():
    config = small_config()
    row = run_sweep(config, "mu", [0.1]).rows[0]
    bounds = run_bounds(config)
    assert row["translucent"] == bounds.translucent
    assert row["combined"] == bounds.combined


def test_sweep_decay_time_column_is_monotone():
    config = RunConfig()
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # short reveal windows warn by design
        result = run_sweep(config, "tau_D", [1, 2, 5, 10, 20, 50, 100])
    fractions = [row["prearrival"] for row in result.rows]
    assert all(b < a for a, b in zip(fractions, fractions[1:]))


def test_sweep_key_rate_peaks_at_interior_mu():
    config = RunConfig()
    grid = list(np.geomspace(0.01, 6.0, 50))
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # large mu values warn by design
        result = run_sweep(config, "mu", grid)
    rates = [row["key_rate"] for row in result.rows]
    peak = int(np.argmax(rates))
    assert 0 < peak < len(rates) - 1


def test_sweep_rejects_empty_grid_and_bad_parameter():
    with pytest.raises(ConfigError):
        run_sweep(RunConfig(), "mu", [])
    with pytest.raises(ConfigError):
        run_sweep(RunConfig(), "tau_X", [1.0])


def test_sweep_csv_golden():
    result = run_sweep(RunConfig(), "mu", [0.05, 0.1, 0.2])
    expected = (
        "parameter,value,translucent,intercept_resend,intercept_resend_approx,"
        "prearrival,combined,raw_yield,key_rate\n"
        "mu,0.05,0.006416275098471059,0.22018261165877953,0.21476865371068943,"
        "0.18126924692201815,0.2265988867572506,0.03992997000657699,"
        "0.030881883254836238\n"
        "mu,0.1,0.012832550196942119,0.15958412255199178,0.15186437142513387,"
        "0.18126924692201815,0.1724166727489339,0.07791253239626399,"
        "0.06447911279505662\n"
        "mu,0.2,0.025665100393884237,0.11848046889226761,0.10738432685534471,"
        "0.18126924692201815,0.14414556928615185,0.14841070704234255,"
        "0.12701796118756378\n"
    )
    assert result.to_csv() == expected
    assert result.columns == SWEEP_COLUMNS


# --- command line ----------------------------------------------------------


def test_cli_simulate_writes_report(tmp_path):
    config = small_config(trials=2)
    config_path = tmp_path / "config.json"
    config_path.write_text(config.to_json())
    out_path = tmp_path / "report.json"
    code = main(
        ["simulate", "--config", str(config_path), "--out", str(out_path)]
    )
    assert code == 0
    report = json.loads(out_path.read_text())
    assert report["config"]["trials"] == 2
    assert "wall_clock_seconds" not in report


def test_cli_simulate_seed_override_changes_report(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(small_config(trials=2).to_json())
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    assert main(["simulate", "--config", str(config_path), "--out", str(out_a)]) == 0
    assert (
        main(
            [
                "simulate",
                "--config",
                str(config_path),
                "--seed",
                "99",
                "--out",
                str(out_b),
            ]
        )
        == 0
    )
    assert out_a.read_text() != out_b.read_text()


def test_cli_reports_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"plate": {"mu_typo": 1}}')
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "mu_typo" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2


def test_cli_env_var_supplies_config(tmp_path, monkeypatch):
    config_path = tmp_path / "config.json"
    config_path.write_text(small_config(trials=1).to_json())
    monkeypatch.setenv("RADIOKEY_CONFIG", str(config_path))
    out_path = tmp_path / "report.json"
    assert main(["simulate", "--out", str(out_path)]) == 0
    assert json.loads(out_path.read_text())["config"]["trials"] == 1


def test_cli_bounds_formats(tmp_path, capsys):
    assert main(["bounds", "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert "combined" in payload
    assert main(["bounds", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("translucent,")
    assert len(lines) == 2


def test_cli_sweep_csv(tmp_path):
    out_path = tmp_path / "sweep.csv"
    code = main(
        ["sweep", "--parameter", "mu", "--values", "0.05,0.1", "--out", str(out_path)]
    )
    assert code == 0
    lines = out_path.read_text().strip().splitlines()
    assert lines[0].split(",")[:2] == ["parameter", "value"]
    assert len(lines) == 3


def test_cli_sweep_grid_spec(capsys):
    assert main(["sweep", "--parameter", "mu", "--grid", "0.05:0.2:4"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 5
    assert main(["sweep", "--parameter", "mu"]) == 2  # no grid given


def test_cli_isotope_activity(capsys):
    assert main(["isotope", "activity", "--name", "Sn-117m"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["activity_bq"] == 1e6
    assert payload["nuclei"] == pytest.approx(1.695e12, rel=5e-3)


def test_cli_isotope_list_and_contamination(capsys):
    assert main(["isotope", "list"]) == 0
    names = {entry["name"] for entry in json.loads(capsys.readouterr().out)}
    assert "Sn-117m" in names
    assert main(["isotope", "contamination", "--duration-days", "30"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert {entry["name"] for entry in payload} == names - {"Sn-117m"}


def test_cli_isotope_dilution(capsys):
    assert (
        main(["isotope", "dilution", "--target-mu", "0.1", "--total-nuclei", "1e12"])
        == 0
    )
    payload = json.loads(capsys.readouterr().out)
    assert payload["samples_available"] == pytest.approx(1e13)


def test_cli_bb84_clean_session(capsys):
    assert main(["bb84", "--bits", "4000", "--seed", "3"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["session"]["qber"] == 0.0
    assert payload["ledger"]["status"] == "OK"
    assert payload["ledger"]["residual_mismatches"] == 0


def test_cli_bb84_eavesdropped_session_aborts(capsys):
    # Intercept-resend pushes the QBER to ~25%, beyond the reconciliation
    # ceiling, so distillation aborts and the exit code reports it.
    assert main(["bb84", "--bits", "4000", "--seed", "3", "--eve"]) == 3
    payload = json.loads(capsys.readouterr().out)
    assert payload["session"]["qber"] > 0.15
    assert payload["ledger"]["status"] == "ABORTED"


def test_cli_verify_detection_flags_brazen_attack(tmp_path):
    config = small_config(trials=2)
    config = dataclasses.replace(
        config,
        attack=dataclasses.replace(
            config.attack, strategy=Strategy.OPAQUE, replacement_budget=100_000
        ),
        postprocess=False,
    )
    config_path = tmp_path / "attack.json"
    config_path.write_text(config.to_json())
    out_path = tmp_path / "report.json"
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # budget truncation warns by design
        code = main(
            [
                "simulate",
                "--config",
                str(config_path),
                "--verify-detection",
                "--out",
                str(out_path),
            ]
        )
    assert code == 4
    report = json.loads(out_path.read_text())
    assert report["aggregate"]["detection_pass_rate"] < 1.0
