import csv
import json
import logging

import pytest
from typer.testing import CliRunner

from app.cli import EXIT_CONFIG, EXIT_IO, EXIT_NONCONVERGENCE, EXIT_OK, app

runner = CliRunner()


@pytest.fixture(autouse=True)
def restore_root_logging():
    """The CLI swaps the root handlers for rich; put the originals back."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def _write_config(tmp_path, rb60f_config_path, **overrides):
    with open(rb60f_config_path) as handle:
        data = json.load(handle)
    for section, values in overrides.items():
        if isinstance(values, dict):
            data.setdefault(section, {}).update(values)
        else:
            data[section] = values
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data, indent=2))
    return path


def _invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


def test_model_writes_operators(tmp_path, rb60f_config_path):
    result = _invoke("model", "--config", rb60f_config_path, "--out", tmp_path)
    assert result.exit_code == EXIT_OK, result.output
    payload = json.loads((tmp_path / "operators.json").read_text())
    assert len(payload["basis"]) == 14
    assert payload["code_indices"] == [9, 10]
    assert payload["hamming"]["passed"] is True
    operators = payload["operators"]
    assert set(operators) == {"zeeman", "raman_A", "raman_B", "h0", "mag_x", "mag_y", "mag_z",
                              "elec_xy", "elec_xz", "elec_yz"}
    assert all(entry["hermitian"] for entry in operators.values())
    assert operators["mag_z"]["spectral_norm"] == pytest.approx(1.0)
    assert (tmp_path / "run_metadata.json").exists()


def test_model_uses_config_from_environment(tmp_path, rb60f_config_path, monkeypatch):
    monkeypatch.setenv("ZENO_CONFIG", str(rb60f_config_path))
    result = _invoke("model", "--out", tmp_path)
    assert result.exit_code == EXIT_OK, result.output
    metadata = json.loads((tmp_path / "run_metadata.json").read_text())
    assert metadata["config"] == str(rb60f_config_path)
    assert metadata["seed"] == 7


def test_optimize_nonconvergence_then_verify(tmp_path, rb60f_config_path):
    """Exit 2 on a failed search; verify reproduces the reported residual from the written timings."""
    config = _write_config(tmp_path, rb60f_config_path, optimizer={"n_pulses": 2, "max_restarts": 2})
    out = tmp_path / "run"
    result = _invoke("optimize", "--config", config, "--out", out, "--seed", 3)
    assert result.exit_code == EXIT_NONCONVERGENCE, result.output
    report = json.loads((out / "coding_report.json").read_text())
    assert report["converged"] is False
    assert report["restarts"] == 2
    timings = json.loads((out / "timings.json").read_text())
    assert timings["tags"] == ["A", "B"]

    checked = _invoke("verify", "--config", config, "--out", out, "--timings", out / "timings.json")
    assert checked.exit_code == EXIT_OK, checked.output
    verified = json.loads((out / "verify_report.json").read_text())
    assert verified["residual"] == pytest.approx(report["residual"], rel=1e-12)
    assert verified["timings_ns"] == timings["timings_ns"]


def test_verify_uses_config_timings(tmp_path, rb60f_config_path):
    result = _invoke("verify", "--config", rb60f_config_path, "--out", tmp_path)
    assert result.exit_code == EXIT_OK, result.output
    verified = json.loads((tmp_path / "verify_report.json").read_text())
    assert len(verified["timings_ns"]) == 34
    assert len(verified["condition_matrix_norms"]) == 6
    assert verified["unitarity_defect"] < 1e-10


def test_verify_without_timings_is_config_error(tmp_path, rb60f_config_path):
    config = _write_config(tmp_path, rb60f_config_path, timings=None)
    result = _invoke("verify", "--config", config, "--out", tmp_path)
    assert result.exit_code == EXIT_CONFIG


def test_simulate_writes_traces_and_sweep(tmp_path, rb60f_config_path):
    config = _write_config(tmp_path, rb60f_config_path, cycle={
        "n_cycles": 2, "n_trajectories": 1, "eta": 0.99,
        "sweep_intervals": ["1 ns", "2 ns", "4 ns", "8 ns", "16 ns"],
    })
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        result = _invoke("simulate", "--config", config, "--out", out)
        assert result.exit_code == EXIT_OK, result.output

    with open(first / "trace_protected.csv") as handle:
        rows = list(csv.DictReader(handle))
    assert [row["cycle"] for row in rows] == ["1", "2"]
    assert set(rows[0]) == {"cycle", "fidelity", "survival_prob", "cumulative_success"}
    assert (first / "trace_unprotected.csv").exists()

    sweep = json.loads((first / "sweep.json").read_text())
    assert sweep["eta"] == 0.99
    # the published timings are a reference sequence, not a coding for this model
    assert sweep["coding"]["tolerance"] == pytest.approx(1e-6)
    assert sweep["coding"]["residual"] > 1e-6
    assert sweep["coding"]["conditions_met"] is False
    assert set(sweep["modes"]) == {"protected", "unprotected"}
    assert sweep["modes"]["unprotected"]["zeno_interval_ns"] == [1.0, 2.0, 4.0, 8.0, 16.0]

    for name in ("trace_protected.csv", "trace_unprotected.csv", "sweep.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_simulate_with_kinetics_eta(tmp_path, rb60f_config_path):
    config = _write_config(tmp_path, rb60f_config_path, cycle={"n_cycles": 1, "n_trajectories": 1,
                                                               "sweep_intervals": []})
    result = _invoke("simulate", "--config", config, "--out", tmp_path)
    assert result.exit_code == EXIT_OK, result.output
    assert not (tmp_path / "sweep.json").exists()


def test_project_reports_eta(tmp_path, rb60f_config_path):
    result = _invoke("project", "--config", rb60f_config_path, "--out", tmp_path)
    assert result.exit_code == EXIT_OK, result.output
    report = json.loads((tmp_path / "eta_report.json").read_text())
    assert report["rate_ratio"] == "8/9"
    assert round(report["error_probability"], 5) == 0.00173
    assert set(report["dominance"]["margins"]) == {"cavity_dominance", "lifetime_60f", "lifetime_5d", "lifetime_5p"}
    with open(tmp_path / "kinetics.csv") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 201
    assert float(rows[0]["rho_g1g1"]) == pytest.approx(0.5)
    assert float(rows[-1]["rho_n1n1"]) + float(rows[-1]["rho_n2n2"]) == pytest.approx(1.0, abs=1e-4)


def test_malformed_config_exits_3(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "seed": 1,\n  "fields": {"b_field": ["1 T", "1 furlong", "0 T"]}\n}')
    result = _invoke("model", "--config", bad, "--out", tmp_path)
    assert result.exit_code == EXIT_CONFIG
    assert "line 3" in result.output


def test_invalid_eta_exits_3(tmp_path, rb60f_config_path):
    config = _write_config(tmp_path, rb60f_config_path, cycle={"eta": "maximal"})
    result = _invoke("simulate", "--config", config, "--out", tmp_path)
    assert result.exit_code == EXIT_CONFIG


def test_wrong_amplitude_count_exits_3(tmp_path, rb60f_config_path):
    config = _write_config(tmp_path, rb60f_config_path, errors={"amplitudes": ["1e-3 rad/ns"]})
    result = _invoke("model", "--config", config, "--out", tmp_path)
    assert result.exit_code == EXIT_CONFIG


def test_missing_config_exits_4(tmp_path):
    result = _invoke("model", "--config", tmp_path / "absent.json", "--out", tmp_path)
    assert result.exit_code == EXIT_IO


def test_simulate_reports_met_conditions_for_a_converged_search(tmp_path, rb60f_config_path):
    """Without timings simulate searches first; a met search is reported as such."""
    config = _write_config(tmp_path, rb60f_config_path, timings=None,
                           optimizer={"n_pulses": 2, "max_restarts": 2, "tolerance": 1e3},
                           cycle={"n_cycles": 1, "n_trajectories": 1, "sweep_intervals": [
                               "1 ns", "2 ns", "4 ns", "8 ns", "16 ns"]})
    result = _invoke("simulate", "--config", config, "--out", tmp_path)
    assert result.exit_code == EXIT_OK, result.output
    coding = json.loads((tmp_path / "sweep.json").read_text())["coding"]
    assert coding["conditions_met"] is True
    assert coding["residual"] <= coding["tolerance"]


@pytest.mark.parametrize("command", ["verify", "simulate"])
def test_timings_of_the_wrong_length_exit_3(tmp_path, rb60f_config_path, command):
    config = _write_config(tmp_path, rb60f_config_path, cycle={"n_cycles": 1, "n_trajectories": 1})
    short = tmp_path / "short.json"
    short.write_text(json.dumps({"timings_ns": [4.0] * 33}))
    result = _invoke(command, "--config", config, "--out", tmp_path, "--timings", short)
    assert result.exit_code == EXIT_CONFIG
    assert "optimizer.n_pulses" in result.output


def test_config_timings_of_the_wrong_length_exit_3(tmp_path, rb60f_config_path):
    config = _write_config(tmp_path, rb60f_config_path, timings=[4.0, 5.0, 6.0])
    result = _invoke("verify", "--config", config, "--out", tmp_path)
    assert result.exit_code == EXIT_CONFIG


def test_narrow_spectrum_changes_the_coding_target(tmp_path, rb60f_config_path):
    """verify scores the same timings against the block-diagonal errors when narrow_spectrum is set."""
    full_out, narrow_out = tmp_path / "full", tmp_path / "narrow"
    narrow_config = _write_config(tmp_path, rb60f_config_path,
                                  fine_structure={"enabled": True, "narrow_spectrum": True})
    assert _invoke("verify", "--config", rb60f_config_path, "--out", full_out).exit_code == EXIT_OK
    assert _invoke("verify", "--config", narrow_config, "--out", narrow_out).exit_code == EXIT_OK
    full = json.loads((full_out / "verify_report.json").read_text())
    narrow = json.loads((narrow_out / "verify_report.json").read_text())
    assert full["error_labels"] == narrow["error_labels"]
    assert narrow["residual"] != pytest.approx(full["residual"], rel=1e-6)
