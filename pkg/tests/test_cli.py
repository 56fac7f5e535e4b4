"""Tests for the command-line interface."""

import csv
import json
import math
from unittest.mock import patch

import numpy as np
import pytest
from typer.testing import CliRunner

from bosechain import __version__
from bosechain.checkpoint import load_checkpoint
from bosechain.commands.validate import Check, run_validate
from bosechain.config import parse_run_config
from bosechain.main import app
from bosechain.oracle import exact_ground
from bosechain.symmps import product_state, to_dense
from bosechain.tebd import GroundStateResult

runner = CliRunner()


def read_csv(path):
    lines = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    return list(csv.reader(lines))


def comments(path):
    return [line for line in path.read_text().splitlines() if line.startswith("#")]


def test_version_command():
    result = runner.invoke(app, ["version"])

    assert result.exit_code == 0
    data = json.loads(result.output)
    assert data["bosechain"] == __version__
    assert "numpy" in data and "scipy" in data


def test_ground_scan_writes_one_row_per_u(write_config, tmp_path):
    """Rows follow the input order under the fixed header."""
    config = write_config(experiment="ground-scan", N=2, M=2, U_values=[0, 1.0])
    out = tmp_path / "scan.csv"

    result = runner.invoke(app, ["ground-scan", "--config", str(config), "--out", str(out)])

    assert result.exit_code == 0, result.output
    rows = read_csv(out)
    assert rows[0] == ["U", "zeta", "energy", "S_half", "S_ends", "logneg", "eps", "chi_max", "steps"]
    assert len(rows) == 3
    assert [float(row[0]) for row in rows[1:]] == [0.0, 1.0]
    assert float(rows[1][2]) == pytest.approx(-2.0, abs=1e-8)
    assert float(rows[1][1]) == pytest.approx(1.0, abs=1e-8)

    chi_rows = read_csv(tmp_path / "scan.chi.csv")
    assert chi_rows[0] == ["U", "step", "chi"]
    assert {float(row[0]) for row in chi_rows[1:]} == {0.0, 1.0}
    assert all(1 <= int(row[2]) <= 3 for row in chi_rows[1:])


def test_ground_scan_is_deterministic(write_config, tmp_path):
    config = write_config(experiment="ground-scan", N=2, M=2, U_values=[0.5, 2.0])
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"

    runner.invoke(app, ["ground-scan", "--config", str(config), "--out", str(first)])
    runner.invoke(app, ["ground-scan", "--config", str(config), "--out", str(second)])

    assert first.read_bytes() == second.read_bytes()


def test_ground_scan_verbose_adds_symmetry_and_entropy_columns(write_config, tmp_path):
    config = write_config(experiment="ground-scan", N=2, M=2, U_values=[1.0])
    out = tmp_path / "scan.csv"

    result = runner.invoke(app, ["ground-scan", "-c", str(config), "-o", str(out), "--verbose"])

    assert result.exit_code == 0, result.output
    rows = read_csv(out)
    assert rows[0][-2:] == ["zeta_sym", "S_1"]
    row = dict(zip(rows[0], rows[1]))
    assert float(row["S_1"]) == pytest.approx(float(row["S_half"]))


def test_ground_scan_non_convergence(write_config, tmp_path):
    """A point that hits the step cap is flagged and the command exits 2."""
    config = write_config(experiment="ground-scan", N=2, M=2, U_values=[1.0], max_steps=1)
    out = tmp_path / "scan.csv"

    result = runner.invoke(app, ["ground-scan", "--config", str(config), "--out", str(out)])

    assert result.exit_code == 2
    rows = read_csv(out)
    assert rows[0][-1] == "status"
    assert rows[1][-1] == "nonconverged"


def test_ground_scan_checkpoint(write_config, tmp_path):
    config = write_config(experiment="ground-scan", N=2, M=2, U_values=[1.0])
    checkpoint = tmp_path / "state.json"

    result = runner.invoke(
        app,
        ["ground-scan", "-c", str(config), "-o", str(tmp_path / "s.csv"), "--checkpoint", str(checkpoint)],
    )

    assert result.exit_code == 0, result.output
    assert load_checkpoint(checkpoint).N == 2


def test_quench_trajectory(write_config, tmp_path):
    """The first row is the Mott state: unit densities, no entanglement."""
    config = write_config(experiment="quench", N=2, M=2, dt=0.01, t_total=0.1, record_every=1)
    out = tmp_path / "quench.csv"
    checkpoint = tmp_path / "final.json"

    result = runner.invoke(
        app, ["quench", "--config", str(config), "--out", str(out), "--checkpoint", str(checkpoint)]
    )

    assert result.exit_code == 0, result.output
    rows = read_csv(out)
    assert rows[0] == [
        "t", "n_1", "n_2", "zeta", "S_half", "S_ends", "logneg", "eps", "chi_max_now", "discarded_cum",
    ]
    assert len(rows) == 12
    first = dict(zip(rows[0], rows[1]))
    assert float(first["n_1"]) == pytest.approx(1.0)
    assert float(first["S_half"]) == 0.0
    assert float(first["logneg"]) == 0.0
    assert float(rows[-1][0]) == pytest.approx(0.1)
    assert load_checkpoint(checkpoint).M == 2



def test_quench_verbose_adds_block_entropies(write_config, tmp_path):
    config = write_config(experiment="quench", N=4, M=4, dt=0.01, t_total=0.05, record_every=5)
    out = tmp_path / "quench.csv"

    result = runner.invoke(app, ["quench", "-c", str(config), "-o", str(out), "--verbose"])

    assert result.exit_code == 0, result.output
    rows = read_csv(out)
    assert rows[0][-4:] == ["zeta_sym", "S_1", "S_2", "S_3"]
    last = dict(zip(rows[0], rows[-1]))
    assert float(last["S_2"]) == pytest.approx(float(last["S_half"]))
    assert float(last["S_1"]) == pytest.approx(float(last["S_3"]), abs=1e-10)

def test_perturb_records_potential(write_config, tmp_path):
    config = write_config(
        experiment="perturb", N=4, M=4, U_mid=5.0, delta=0.02, dt=0.01, t_total=0.05,
        record_every=1, tol=1e-10,
    )
    out = tmp_path / "perturb.csv"

    result = runner.invoke(app, ["perturb", "--config", str(config), "--out", str(out)])

    assert result.exit_code == 0, result.output
    header_comments = comments(out)
    assert any("delta=0.02" in line and "c2=-0.02" in line for line in header_comments)
    assert len(read_csv(out)) == 7


def test_transfer_check_pth_passes(write_config, tmp_path):
    config = write_config(experiment="transfer-check", N=5, M=5, profile="pth")

    result = runner.invoke(app, ["transfer-check", "-c", str(config), "-o", str(tmp_path / "f.csv")])

    assert result.exit_code == 0, result.output
    assert "PASS" in result.output


def test_transfer_check_uniform_has_no_verdict(write_config, tmp_path):
    config = write_config(experiment="transfer-check", N=5, M=5, profile="ch")

    result = runner.invoke(app, ["transfer-check", "-c", str(config), "-o", str(tmp_path / "f.csv")])

    assert result.exit_code == 0, result.output
    assert "n/a" in result.output
    assert "PASS" not in result.output


def test_validate_dimer_passes(write_config):
    config = write_config(experiment="validate", N=2, M=2)

    result = runner.invoke(app, ["validate", "--config", str(config)])

    assert result.exit_code == 0, result.output
    assert "PASS" in result.output
    assert "FAIL" not in result.output



def test_validate_reports_overlap_magnitude():
    """The fidelity check compares the overlap itself, not its square."""
    config = parse_run_config({"experiment": "validate", "N": 2, "M": 2})
    spec = config.spec()
    seed = product_state([1, 1])
    stub = GroundStateResult(seed, 0.0, 1, [1])

    with patch("bosechain.commands.validate.ground_state", return_value=stub):
        checks = {check.name: check for check in run_validate(config)}

    _, exact_psi = exact_ground(spec)
    overlap = abs(np.vdot(exact_psi, to_dense(seed)))
    assert checks["ground fidelity"].error == pytest.approx(1 - overlap)
    assert checks["ground fidelity"].status == "FAIL"

def test_validate_skips_oracle_checks_above_capacity(write_config, monkeypatch):
    monkeypatch.setenv("BOSECHAIN_ORACLE_CAP", "1")
    config = write_config(experiment="validate", N=2, M=2)

    result = runner.invoke(app, ["validate", "--config", str(config)])

    assert result.exit_code == 0, result.output
    assert "SKIPPED" in result.output


def test_validate_failure_exit_code(write_config):
    config = write_config(experiment="validate", N=2, M=2)
    failing = [Check("ground energy", "FAIL", 1.0, 1e-8)]

    with patch("bosechain.commands.validate.run_validate", return_value=failing):
        result = runner.invoke(app, ["validate", "--config", str(config)])

    assert result.exit_code == 3


def test_config_error_exit_code(write_config, tmp_path):
    config = write_config(experiment="quench", N=4, M=4, U_mdi=5)

    result = runner.invoke(app, ["quench", "--config", str(config), "--out", str(tmp_path / "q.csv")])

    assert result.exit_code == 4
    assert "Unknown config keys" in result.output


def test_unexpected_error_is_reported(write_config, tmp_path):
    config = write_config(experiment="quench", N=4, M=4)

    with patch("bosechain.commands.quench.run_quench", side_effect=RuntimeError("boom")):
        result = runner.invoke(app, ["quench", "--config", str(config), "--out", str(tmp_path / "q.csv")])

    assert result.exit_code == 1
    assert "boom" in result.output


def test_transfer_check_json_report(write_config, tmp_path):
    config = write_config(experiment="transfer-check", N=4, M=4, profile="pth")

    result = runner.invoke(
        app, ["transfer-check", "-c", str(config), "-o", str(tmp_path / "f.csv"), "--json"]
    )

    assert result.exit_code == 0, result.output
    report = json.loads(result.output[: result.output.rindex("}") + 1])
    assert report["profile"] == "pth"
    assert report["passed"] is True
    assert report["mirror_time"] == pytest.approx(math.pi / 2)
