import csv
import io
import json
import subprocess
import sys

import pytest

from loopsoup import cli
from loopsoup.cli import ExperimentConfig


def run_main(capsys, argv):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_finfty_table_example(capsys):
    code, out, _ = run_main(capsys, ["finfty-table", "--theta", "0.5", "--s", "1,2,4"])
    assert code == 0
    rows = parse_csv(out)
    got = [(float(r["s"]), float(r["value"])) for r in rows]
    assert got[0] == (1.0, 1.0)
    assert got[1][1] == pytest.approx(0.5, abs=1e-12)
    assert got[2][1] == pytest.approx(1 / 3, abs=1e-12)
    assert {"value", "method_tolerance"} <= set(rows[0])


def test_invalid_alpha_exit_2(capsys):
    code, _, err = run_main(capsys, ["fixed-point", "--theta", "0.5", "--alpha", "0.9"])
    assert code == 2
    rep = json.loads(err.strip().splitlines()[-1])
    assert rep["error"] == "validation" and "alpha" in rep["message"]


def test_bad_flags_exit_2(capsys):
    assert run_main(capsys, ["finfty-table", "--no-such-flag", "1"])[0] == 2
    assert run_main(capsys, ["finfty-table", "--theta", "abc"])[0] == 2
    assert run_main(capsys, ["not-a-command"])[0] == 2


def test_nonconvergence_exit_3(capsys):
    code, _, err = run_main(capsys, ["fixed-point", "--max-iter", "3"])
    assert code == 3
    assert json.loads(err.strip().splitlines()[-1])["error"] == "non-convergence"


def test_io_error_exit_4(capsys, tmp_path):
    bad = tmp_path / "missing" / "dir" / "x.csv"
    assert run_main(capsys, ["finfty-table", "--out", str(bad)])[0] == 4
    assert run_main(capsys, ["finfty-table", "--config", str(tmp_path / "none.json")])[0] == 4


def test_fixed_point_theta_above_one():
    env = cli.run(ExperimentConfig("fixed-point", {"theta": 1.2, "alpha": -0.1, "start": 0.5}, seed=1))
    assert env.summary["converged"]
    assert max(abs(r["value"] - 1.0) for r in env.rows) <= 1e-3


def test_envelope_and_files(capsys, tmp_path):
    out = tmp_path / "t.csv"
    code, stdout, _ = run_main(capsys, ["tau-theta", "--out", str(out), "--seed", "7"])
    assert code == 0
    assert json.loads(stdout)["rows"] == 4
    env = json.loads((tmp_path / "t.csv.json").read_text())
    for key in ("command", "params", "seed", "version", "started_at", "runtime_ms", "rows", "warnings"):
        assert key in env
    assert env["seed"] == 7 and env["command"] == "tau-theta"
    assert len(parse_csv(out.read_text())) == 4
    assert "\r" not in out.read_text()


def test_json_format_stdout(capsys):
    code, out, _ = run_main(capsys, ["finfty-table", "--format", "json", "--s", "2"])
    assert code == 0
    env = json.loads(out)
    assert env["rows"][0]["value"] == pytest.approx(0.5)


def test_mc_rows_carry_estimate_stderr_n():
    env = cli.run(ExperimentConfig("soup1d-cover", {"n": 500, "epsilon": "1e-2"}, seed=3))
    for r in env.rows:
        assert {"estimate", "stderr", "n"} <= set(r)
    env = cli.run(ExperimentConfig("annulus-kernel", {}, seed=3))
    for r in env.rows:
        assert {"value", "method_tolerance"} <= set(r)


@pytest.mark.parametrize("argv", [
    ["soup1d-cover", "--n", "2000", "--epsilon", "1e-2,1e-3"],
    ["wos-hit", "--geometry", "annulus", "--n", "20000"],
    ["soup2d-cross", "--n", "10"],
    ["arcsine", "--n", "500", "--epsilon", "1e-2"],
])
def test_byte_identical_reruns(capsys, argv):
    a = run_main(capsys, argv + ["--seed", "11", "--threads", "1"])[1]
    b = run_main(capsys, argv + ["--seed", "11", "--threads", "2"])[1]
    c = run_main(capsys, argv + ["--seed", "12", "--threads", "1"])[1]
    assert a == b
    assert a != c


def test_config_precedence(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"theta": 0.25, "s": "2"}, "seed": 99}))
    _, out, _ = run_main(capsys, ["finfty-table", "--config", str(cfg)])
    assert float(parse_csv(out)[0]["theta"]) == 0.25
    _, out, _ = run_main(capsys, ["finfty-table", "--config", str(cfg), "--theta", "0.75"])
    assert float(parse_csv(out)[0]["theta"]) == 0.75
    env = cli.run(ExperimentConfig("finfty-table", {}, seed=1))
    assert env.params["theta"] == 0.5
    cfg.write_text("[1, 2]")
    assert run_main(capsys, ["finfty-table", "--config", str(cfg)])[0] == 2


def test_seed_env(monkeypatch, capsys, tmp_path):
    monkeypatch.setenv("LOOPSOUP_SEED", "5")
    out = tmp_path / "x.csv"
    run_main(capsys, ["finfty-table", "--out", str(out)])
    assert json.loads((tmp_path / "x.csv.json").read_text())["seed"] == 5


def test_sweep_theta_increasing(capsys):
    code, out, _ = run_main(capsys, ["sweep", "--axis", "theta", "--values", "0.9,0.95,0.99",
                                     "finfty-table", "--s", "2"])
    assert code == 0
    vals = [float(r["value"]) for r in parse_csv(out)]
    assert len(vals) == 3 and vals[0] < vals[1] < vals[2] < 1
    assert [r["sweep_index"] for r in parse_csv(out)] == ["0", "1", "2"]


def test_sweep_epsilon_monotone():
    env = cli.sweep(ExperimentConfig("soup1d-cover", {"n": 4000}, seed=2), "epsilon", ["1e-2", "1e-3"])
    (a, b) = env.rows
    assert b["estimate"] >= a["estimate"] - 2 * (a["stderr"] ** 2 + b["stderr"] ** 2) ** 0.5


def test_empty_sweep(capsys):
    with pytest.raises(cli.ValidationError):
        cli.sweep(ExperimentConfig("finfty-table", {}), "theta", [])
    assert run_main(capsys, ["sweep", "--axis", "theta", "--values", ",", "finfty-table"])[0] == 2


def test_warnings_surface():
    env = cli.run(ExperimentConfig("crossing-measure", {"sep": 0.05, "rx": 0.01, "ry": 0.01,
                                                         "regime_policy": "warn"}, seed=1))
    assert env.warnings and any("regime" in w["message"].lower() for w in env.warnings)
    with pytest.raises(Exception):
        cli.run(ExperimentConfig("crossing-measure", {"sep": 0.05, "rx": 0.01, "ry": 0.01}, seed=1))


@pytest.mark.parametrize("command", sorted(set(cli.HANDLERS) - {"fixed-point", "wos-hit", "besq-check"}))
def test_every_command_runs_small(command):
    small = {"soup1d-cover": {"n": 300, "epsilon": "1e-2"}, "arcsine": {"n": 300, "epsilon": "1e-2"},
             "soup2d-cross": {"n": 5}, "surround-scan": {"n": 20},
             "capacity": {"h": "0.0625,0.03125"}}
    env = cli.run(ExperimentConfig(command, small.get(command, {}), seed=4, threads=1))
    assert env.rows
    json.loads(env.to_json())


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "loopsoup.cli", "finfty-table", "--s", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "0.5" in r.stdout
