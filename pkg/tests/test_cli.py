import numpy as np
import pytest

from hivdelay import cli
from hivdelay.io import read_table
from hivdelay.params import ModelParams
from strategies import two_root_params


def run(*argv):
    return cli.main([str(a) for a in argv])


def table(path):
    header, rows = read_table(path)
    return header, np.array(rows, dtype=float)


def test_simulate_writes_state_columns(tmp_path):
    assert run("simulate", "--out", tmp_path, "--tspan", "0:15:0.5") == 0
    header, rows = table(tmp_path / "trajectory.csv")
    assert header == ["t", "S0", "S1", "S2", "Z", "I", "R"]
    assert rows.shape == (31, 7)
    assert rows[0, 1:].tolist() == [5.014983, 0, 0, 0.2, 0.884997, 0]


def test_simulate_overlay_and_long_horizon(tmp_path):
    assert run("simulate", "--out", tmp_path, "--delay", 0, "--tspan", "0:125:5",
               "--data", "builtin", "--format", "json-lines") == 0
    _, rows = read_table(tmp_path / "trajectory.jsonl")
    assert rows[-1][0] == 125.0
    header, overlay = read_table(tmp_path / "overlay.jsonl")
    assert header == ["year", "t", "observable", "model", "data"]
    assert len(overlay) == 14


def test_simulate_is_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert run("simulate", "--out", tmp_path / sub) == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert run("si") == 0
    assert (tmp_path / "env" / "si_trajectory.csv").exists()


def test_fit_u6(tmp_path):
    assert run("fit", "--out", tmp_path, "--delay", 6, "--jobs", 1) == 0
    header, rows = table(tmp_path / "fit.csv")
    assert header[:7] == ["u", "beta0", "eta", "gamma0", "q", "tau", "sse"]
    u, beta0, *_ = rows[0]
    assert u == 6.0 and abs(beta0 - 0.021509) / 0.021509 <= 0.10
    assert rows[0, 6] <= 1.35
    _, trace = table(tmp_path / "trace_u6.csv")
    assert trace[-1, -1] == pytest.approx(rows[0, 6], rel=1e-14)


def test_fit_budget_exit_code_keeps_trace(tmp_path):
    assert run("fit", "--out", tmp_path, "--max-iter", 4) == cli.EXIT_OPTIMIZER
    _, trace = table(tmp_path / "trace_u6.csv")
    assert len(trace) == 4


def test_missing_dataset(tmp_path):
    assert run("fit", "--out", tmp_path, "--data", tmp_path / "nope.csv") == cli.EXIT_DATA


def test_config_errors(tmp_path):
    assert run("analyze", "--out", tmp_path, "--params", tmp_path / "nope.txt") == cli.EXIT_CONFIG
    assert run("simulate", "--out", tmp_path, "--tspan", "5:1:1") == cli.EXIT_CONFIG
    assert run("simulate", "--out", tmp_path, "--rtol", "-1") == cli.EXIT_CONFIG
    assert run("sweep", "--out", tmp_path, "--tau-grid", "1:10:5,cubic") == cli.EXIT_CONFIG
    assert run() == cli.EXIT_CONFIG


def test_solver_error_exit(tmp_path):
    bad = tmp_path / "p.txt"
    bad.write_text("beta0 = 1e200\nbeta1 = 1e200\nbeta2 = 1e200\n")
    code = run("simulate", "--out", tmp_path, "--params", bad, "--tspan", "0:50:1")
    assert code == cli.EXIT_SOLVER


def test_analyze_report(tmp_path, capsys):
    assert run("analyze", "--out", tmp_path) == 0
    text = (tmp_path / "analysis.txt").read_text()
    assert text == capsys.readouterr().out
    values = dict(line.split(" = ", 1) for line in text.splitlines() if " = " in line)
    assert round(float(values["D0"]), 4) == 0.0032
    lo, hi = (float(v) for v in values["persistence_bounds"].strip("()").split(","))
    assert (round(lo, 4), round(hi, 4)) == (0.0316, 39.7131)
    E = [float(v) for v in values["E*[0] (S0,S1,S2,Z,I)"].strip("()").split(",")]
    np.testing.assert_allclose(E, (0.2083, 3.5866, 16.6702, 2.2580, 1.2561), rtol=5e-4)
    assert values["root_case"] == "UniqueSupercritical"
    assert values["tau_limit_case"] == "persistent"


def test_analyze_subcritical(tmp_path, capsys):
    p = ModelParams.uganda(6)
    params = tmp_path / "p.txt"
    b = 0.5 * p.D0
    params.write_text(f"beta0 = {b}\nbeta1 = {0.05 * b}\nbeta2 = {0.4 * b}\n")
    assert run("analyze", "--out", tmp_path, "--params", params) == 0
    out = capsys.readouterr().out
    assert "disease-free globally attracting" in out
    assert "dfe_verdict = Stable" in out
    assert "root_case = NoRoot" in out


def test_analyze_two_roots(tmp_path, capsys):
    params = tmp_path / "p.txt"
    two_root_params().to_file(params)
    assert run("analyze", "--out", tmp_path, "--params", params) == 0
    out = capsys.readouterr().out
    assert "root_case = TwoRoots" in out
    assert "(+)" in out and "(-)" in out
    assert "E*[1]" in out


def test_sweep_outputs(tmp_path, capsys):
    assert run("sweep", "--out", tmp_path, "--tau-grid", "0.1:1000:20,log",
               "--beta0-scan", "0.004:0.05:5", "--jobs", 2) == 0
    header, rows = table(tmp_path / "tau_sweep.csv")
    assert header[:2] == ["tau", "I*"]
    assert np.all(np.diff(rows[:, 1]) < 0)
    _, g = table(tmp_path / "g_curve.csv")
    s = np.sign(g[:, 1] - g[:, 2])
    assert np.sum(s[1:] != s[:-1]) == 1
    _, scan = table(tmp_path / "beta0_scan.csv")
    assert scan.shape == (5, 2)
    out = capsys.readouterr().out
    assert "beta0" in out


def test_sweep_linear_grid(tmp_path):
    assert run("sweep", "--out", tmp_path, "--tau-grid", "1:3:3,lin", "--jobs", 1) == 0
    _, rows = table(tmp_path / "tau_sweep.csv")
    assert rows[:, 0].tolist() == [1.0, 2.0, 3.0]


def test_si_runs(tmp_path):
    assert run("si", "--out", tmp_path, "--beta0", 0.021509, "--delay", 6) == 0
    header, rows = table(tmp_path / "si_trajectory.csv")
    assert header == ["t", "S0", "I"]
    assert rows[-1, 2] > rows[-20, 2]
    assert run("si", "--out", tmp_path, "--I0", 0, "--history-I", 0) == 0
    _, flat = table(tmp_path / "si_trajectory.csv")
    assert np.all(flat[:, 2] == 0)


def test_flags_override_parameter_file(tmp_path):
    params = tmp_path / "p.txt"
    params.write_text("beta0 = 0.03\nu = 3\n")
    args = cli.build_parser().parse_args(["analyze", "--params", str(params), "--beta0", "0.04"])
    p = cli.resolve_params(args)
    assert (p.beta0, p.u) == (0.04, 3.0)
    args = cli.build_parser().parse_args(["analyze", "--delay", "9"])
    p = cli.resolve_params(args)
    assert (p.u, p.beta0) == (9.0, ModelParams.uganda(9).beta0)
