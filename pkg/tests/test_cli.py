import json
import subprocess
import sys

import pytest

from islab import cli
from islab.errors import NumericalAbort
from islab.suites import SUITES, SuiteContext, list_suites, resolve, run_suites

SMALL = """
[run]
seed = 11
[grid]
n_cells = 64
[time]
T = 0.05
[profile]
u_amp = 0.05
a0_amp = 0.2
"""


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(SMALL)
    return p


def run_cli(*args):
    return cli.main([str(a) for a in args])


@pytest.mark.parametrize("experiment,files", [
    ("simulate-nonlinear", ["snapshots.csv", "metadata.json", "report.json"]),
    ("simulate-linearized", ["energy.csv", "metadata.json", "report.json"]),
    ("norms", ["norms.json", "metadata.json", "report.json"]),
    ("spectrum", ["spectrum.json", "metadata.json", "report.json"]),
])
def test_experiments_pass(experiment, files, config, tmp_path, capsys):
    out = tmp_path / experiment
    assert run_cli(experiment, "--config", config, "--out", out) == cli.EXIT_PASS
    for f in files:
        assert (out / f).exists()
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["experiment"] == experiment
    assert "PASS" in capsys.readouterr().out


def test_energy_csv_header(config, tmp_path):
    out = tmp_path / "lin"
    run_cli("simulate-linearized", "--config", config, "--out", out)
    lines = (out / "energy.csv").read_text().splitlines()
    assert lines[0] == "t,E,H_norm,source_norm,K_measured"
    assert all(len(line.split(",")) == 5 for line in lines[1:])


def test_uniform_background_energy_check(tmp_path):
    p = tmp_path / "u.ini"
    p.write_text(SMALL + "[linearized]\nbackground = uniform\n")
    out = tmp_path / "u"
    assert run_cli("simulate-linearized", "--config", p, "--out", out) == cli.EXIT_PASS
    names = [c["name"] for c in json.loads((out / "report.json").read_text())["checks"]]
    assert any("nonincreasing" in n for n in names)


def test_verify_suite(config, tmp_path, capsys):
    out = tmp_path / "v"
    assert run_cli("verify", "--config", config, "--suite", "orders", "--out", out) == cli.EXIT_PASS
    suites = json.loads((out / "suites.json").read_text())
    assert [s["suite"] for s in suites] == ["orders"] and suites[0]["passed"]
    assert "PASS suite orders" in capsys.readouterr().out


def test_outputs_are_deterministic(config, tmp_path):
    for name in ("a", "b"):
        assert run_cli("simulate-nonlinear", "--config", config, "--out", tmp_path / name) == 0
        assert run_cli("verify", "--config", config, "--suite", "decay", "--out", tmp_path / f"v{name}") == 0
    for f in ("snapshots.csv", "metadata.json", "report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    for f in ("suites.json", "report.json"):
        assert (tmp_path / "va" / f).read_bytes() == (tmp_path / "vb" / f).read_bytes()


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nbogus = 1\n")
    assert run_cli("norms", "--config", bad) == cli.EXIT_CONFIG
    assert "grid.bogus" in capsys.readouterr().err
    assert run_cli("norms") == cli.EXIT_CONFIG
    assert run_cli("norms", "--config", tmp_path / "missing.ini") == cli.EXIT_CONFIG


def test_unknown_suite_exit_2(config, tmp_path, capsys):
    assert run_cli("verify", "--config", config, "--suite", "nope", "--out", tmp_path / "x") == cli.EXIT_CONFIG
    assert "run.suite" in capsys.readouterr().err


@pytest.mark.parametrize("value", ["zero", "0", "-2"])
def test_thread_cap_validation(value, config, monkeypatch):
    monkeypatch.setenv("ISLAB_THREADS", value)
    assert run_cli("norms", "--config", config) == cli.EXIT_CONFIG


def test_thread_cap_default(monkeypatch):
    monkeypatch.delenv("ISLAB_THREADS", raising=False)
    assert cli.thread_cap() == 1
    monkeypatch.setenv("ISLAB_THREADS", "4")
    assert cli.thread_cap() == 4


def test_failed_check_exit_1(config, tmp_path, monkeypatch):
    monkeypatch.setitem(cli.RUNNERS, "norms", lambda cfg, out: [cli.at_most("forced", 2.0, 1.0)])
    out = tmp_path / "f"
    assert run_cli("norms", "--config", config, "--out", out) == cli.EXIT_FAIL
    assert json.loads((out / "report.json").read_text())["passed"] is False


def test_numerical_abort_exit_3(config, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericalAbort("non-finite field values", 3, 0.01)
    monkeypatch.setattr(cli, "simulate", boom)
    out = tmp_path / "abort"
    assert run_cli("simulate-nonlinear", "--config", config, "--out", out) == cli.EXIT_ABORT
    assert "abort" in json.loads((out / "report.json").read_text())


def test_list_suites(capsys):
    assert run_cli("list-suites") == cli.EXIT_PASS
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == len(SUITES) >= 9
    for line in lines:
        assert resolve(line.split()[0]) == [line.split()[0]]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "islab", "list-suites"], capture_output=True, text=True, check=True)
    assert res.stdout == list_suites() + "\n"


def test_suite_registry():
    assert resolve("all") == list(SUITES)
    with pytest.raises(KeyError):
        resolve("unknown")
    (res,) = run_suites(["causality"], SuiteContext())
    assert res.passed and res.checks and "seconds" not in res.as_dict()


def test_verify_all_within_ten_minutes(config, tmp_path):
    import time
    start = time.perf_counter()
    out = tmp_path / "all"
    assert run_cli("verify", "--config", config, "--suite", "all", "--out", out) == cli.EXIT_PASS
    assert time.perf_counter() - start < 600
    assert len(json.loads((out / "suites.json").read_text())) == len(SUITES)
