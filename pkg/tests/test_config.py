import pytest

from islab.config import EXPERIMENTS, SCHEMA, load_config, parse_config
from islab.errors import ConfigError

FULL = """
[run]
experiment = simulate-linearized
seed = 7
output_dir = out
[constants]
kappa = 2
lambda0 = 0.5
[grid]
n_cells = 64
[time]
T = 0.2
cfl = 0.3
[evolution]
far_bc = frozen
move_boundary = no
[profile]
a0_amp = 0.2
[linearized]
background = uniform
r0 = 0.25
"""


def test_full_config():
    cfg = parse_config(FULL)
    assert cfg.experiment == "simulate-linearized" and cfg.seed == 7 and str(cfg.output_dir) == "out"
    assert cfg.constants.kappa == 2.0 and cfg.constants.lambda0 == 0.5 and cfg.grid.n_cells == 64
    assert cfg.T == 0.2 and cfg.cfl == 0.3 and cfg.evolution.cfl == 0.3
    assert cfg.evolution.far_bc == "frozen" and cfg.evolution.move_boundary is False
    assert cfg.profile.a0_amp == 0.2 and cfg.linearized.background == "uniform" and cfg.linearized.r0 == 0.25
    d = cfg.as_dict()
    assert set(d) >= {"experiment", "constants", "grid", "time", "evolution", "profile", "linearized"}


def test_defaults_and_override():
    cfg = parse_config("", experiment="verify")
    assert cfg.experiment == "verify" and cfg.seed == 20240601 and cfg.grid.n_cells == 200 and cfg.suite is None
    assert parse_config(FULL, experiment="norms").experiment == "norms"
    assert set(EXPERIMENTS) == {"simulate-nonlinear", "simulate-linearized", "verify", "spectrum", "norms"}
    assert "T" in SCHEMA["time"]


@pytest.mark.parametrize("text,key", [
    ("[run]\nexperiment = verify\n[grid]\nbogus = 1\n", "grid.bogus"),
    ("[run]\nexperiment = verify\n[nowhere]\na = 1\n", "nowhere"),
    ("[run]\nexperiment = verify\n[time]\nT = -1\n", "time.T"),
    ("[run]\nexperiment = verify\n[time]\ncfl = 1.5\n", "time.cfl"),
    ("[run]\nexperiment = verify\n[grid]\nn_cells = 10\n", "grid.n_cells"),
    ("[run]\nexperiment = verify\n[grid]\nn_cells = many\n", "grid.n_cells"),
    ("[run]\nexperiment = verify\n[grid]\nb0 = 1\nx_far = 0.5\n", "grid.x_far"),
    ("[run]\nexperiment = dance\n", "run.experiment"),
    ("[grid]\nn_cells = 64\n", "run.experiment"),
    ("[run]\nexperiment = verify\n[linearized]\nbackground = odd\n", "linearized.background"),
])
def test_invalid_configs_name_the_key(text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert key in str(exc.value)


def test_invalid_constants_and_malformed():
    with pytest.raises(ConfigError):
        parse_config("[run]\nexperiment = verify\n[constants]\nkappa = 0\n")
    with pytest.raises(ConfigError):
        parse_config("no section header")
    with pytest.raises(ConfigError):
        load_config("/nonexistent/islab.ini")


def test_load_config(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(FULL)
    assert load_config(p).grid.n_cells == 64
