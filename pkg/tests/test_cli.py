from __future__ import annotations

import json

import pytest

from eknit.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from eknit.engine import reference_scenario, run_scenario, save_scenario
from eknit.topology import REFERENCE_POSITIONS


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    save_scenario(reference_scenario(), path)
    return str(path)


def test_simulate_prints_full_result(capsys):
    assert main(["simulate"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["final_scan"] == [0x10, 0x11, 0x12, 0x13, 0x14]
    assert data["seed"] == 42
    assert set(data["site_margins"]) == set(REFERENCE_POSITIONS) | {"back"}


def test_simulate_writes_result_file(tmp_path, scenario_file, capsys):
    out = tmp_path / "result.json"
    assert main(["simulate", scenario_file, "--out", str(out)]) == EXIT_OK
    stored = json.loads(out.read_text())
    assert stored["summary"]["scan_size"] == 5
    # stdout carries only the summary in file mode
    summary = json.loads(capsys.readouterr().out)
    assert summary == stored["summary"]


def test_missing_scenario_file_is_io_error(capsys):
    assert main(["simulate", "/no/such/file.json"]) == EXIT_IO
    assert "i/o error" in capsys.readouterr().err


def test_malformed_scenario_file_is_validation_error(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{this is not json")
    assert main(["simulate", str(path)]) == EXIT_VALIDATION
    assert "error" in capsys.readouterr().err


def test_unknown_scenario_field_is_validation_error(tmp_path):
    path = tmp_path / "odd.json"
    path.write_text('{"schema": 1, "hub_site": "x", "layout": {}, "zap": 1}')
    assert main(["simulate", str(path)]) == EXIT_VALIDATION


def test_seed_env_var_overrides_scenario_seed(scenario_file, capsys,
                                              monkeypatch):
    monkeypatch.setenv("EKNIT_SEED", "77")
    assert main(["simulate", scenario_file]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["seed"] == 77
    monkeypatch.setenv("EKNIT_SEED", "soup")
    assert main(["simulate", scenario_file]) == EXIT_VALIDATION


def test_scan_reports_margins(capsys):
    assert main(["scan"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["scan"] == [0x10, 0x11, 0x12, 0x13, 0x14]
    corner = data["site_margins"]["hem_corner"]
    assert corner["decodable"] is True
    assert corner["margin_v"] == pytest.approx(4.1282, abs=1e-3)


def test_shake_test_single_motion(capsys):
    assert main(["shake-test", "--motion", "jumping", "--trials", "10"]) \
        == EXIT_OK
    table = json.loads(capsys.readouterr().out)
    assert len(table) == 1
    assert table[0]["motion"] == "jumping"
    assert table[0]["trials"] == 10
    assert len(table[0]["modules"]) == 5


def test_placement_eval_ranks_positions(tmp_path, capsys):
    csv_path = tmp_path / "ranking.csv"
    assert main(["placement-eval", "--seeds", "5", "--duration", "2.0",
                 "--csv", str(csv_path)]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["argmin_index"] == 1
    assert len(data["ranking"]) == 8
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "position_index,distance_cm,mpjre_deg"
    assert len(lines) == 9


def test_calibrate_misalignment(capsys):
    assert main(["calibrate-misalignment", "--target", "0.074",
                 "--seeds", "200"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["target_fraction"] == 0.074
    assert data["n_seeds"] == 200
    assert 0.0 < data["sigma_mm"] < 5.0
    assert data["achieved_fraction"] == pytest.approx(0.074, abs=0.02)


def test_calibrate_unreachable_target_fails_validation(capsys):
    assert main(["calibrate-misalignment", "--target", "0.95",
                 "--seeds", "50"]) == EXIT_VALIDATION
    assert "error" in capsys.readouterr().err


def test_export_csv_margins(capsys):
    assert main(["export", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "site,margin_v,decodable,reachable"
    assert len(lines) == 11
    by_site = {line.split(",")[0]: line for line in lines[1:]}
    margin = float(by_site["hem_corner"].split(",")[1])
    assert margin == pytest.approx(4.1282, abs=1e-3)
    assert by_site["right_wrist"].endswith(",1,1")


def test_export_jsonl_transactions(tmp_path, scenario_file):
    out = tmp_path / "log.jsonl"
    # the reference scenario has no events, so add a poll via simulate check
    assert main(["export", scenario_file, "--out", str(out)]) == EXIT_OK
    assert out.read_text() == ""


def test_export_waveforms_directory(tmp_path):
    wavedir = tmp_path / "waves"
    assert main(["export", "--format", "csv", "--out",
                 str(tmp_path / "m.csv"), "--waveforms", str(wavedir)]) \
        == EXIT_OK
    files = sorted(p.name for p in wavedir.glob("*.csv"))
    assert "hem_corner.csv" in files
    assert len(files) == 10
    first = (wavedir / "hem_corner.csv").read_text().splitlines()
    assert first[0] == "time_s,volts"
    t0, v0 = first[1].split(",")
    assert float(t0) == 0.0
    assert 0.0 <= float(v0) <= 5.0


def test_scan_out_file(tmp_path):
    out = tmp_path / "scan.json"
    assert main(["scan", "--out", str(out)]) == EXIT_OK
    data = json.loads(out.read_text())
    assert data["scan"] == [16, 17, 18, 19, 20]


def test_results_match_library_api(capsys):
    assert main(["simulate"]) == EXIT_OK
    cli_result = json.loads(capsys.readouterr().out)
    lib_result = json.loads(run_scenario(reference_scenario()).to_json())
    assert cli_result == lib_result
