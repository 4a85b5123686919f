"""Run configuration: an INI file parsed with ``configparser``.

Grammar (every key optional unless noted; unknown sections or keys are rejected)::

    [run]
    experiment = simulate-nonlinear | simulate-linearized | verify | spectrum | norms
                                        (required unless given on the command line)
    suite = <suite name> | all          (verify only, default all)
    output_dir = <path>                 (default islab-out)
    seed = <integer>                    (default 20240601)

    [constants]   kappa, tau_pi, lambda0, zeta0
    [grid]        n_cells (>= 32), b0, x_far
    [time]        T (> 0), cfl (in (0, 1))
    [evolution]   far_bc = pinned | frozen | free, move_boundary, snapshot_every, accuracy
    [profile]     any VacuumProfile field (slope, length, bump, a0_mean, a0_amp, u_amp, u_tilt, ...)
    [linearized]  background = profile | uniform, r0, pi0, amplitude

Command-line ``--suite`` and ``--out`` override the file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, IslabError
from .model import ModelConstants
from .nonlinear import EvolutionOptions
from .profiles import VacuumProfile

EXPERIMENTS = ("simulate-nonlinear", "simulate-linearized", "verify", "spectrum", "norms")
DEFAULT_SEED = 20240601

_PROFILE_KEYS = {f.name: f.type for f in fields(VacuumProfile)}
SCHEMA: dict[str, dict[str, type]] = {
    "run": {"experiment": str, "suite": str, "output_dir": str, "seed": int},
    "constants": {"kappa": float, "tau_pi": float, "lambda0": float, "zeta0": float},
    "grid": {"n_cells": int, "b0": float, "x_far": float},
    "time": {"T": float, "cfl": float},
    "evolution": {"far_bc": str, "move_boundary": bool, "snapshot_every": int, "accuracy": int},
    "profile": {k: float for k in _PROFILE_KEYS},
    "linearized": {"background": str, "r0": float, "pi0": float, "amplitude": float},
}


@dataclass(frozen=True)
class GridConfig:
    n_cells: int = 200
    b0: float = 0.0
    x_far: float = 1.0


@dataclass(frozen=True)
class LinearizedConfig:
    background: str = "profile"
    r0: float = 0.3
    pi0: float = 0.2
    amplitude: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    constants: ModelConstants = field(default_factory=ModelConstants)
    grid: GridConfig = field(default_factory=GridConfig)
    T: float = 0.5
    cfl: float = 0.4
    suite: str | None = None
    output_dir: Path = Path("islab-out")
    seed: int = DEFAULT_SEED
    evolution: EvolutionOptions = field(default_factory=EvolutionOptions)
    profile: VacuumProfile = field(default_factory=VacuumProfile)
    linearized: LinearizedConfig = field(default_factory=LinearizedConfig)

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {', '.join(EXPERIMENTS)}",
                              "run.experiment")
        if not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}", "time.T")
        if not 0 < self.cfl < 1:
            raise ConfigError(f"cfl must lie in (0, 1), got {self.cfl}", "time.cfl")
        if self.grid.n_cells < 32:
            raise ConfigError(f"n_cells must be at least 32, got {self.grid.n_cells}", "grid.n_cells")
        if not self.grid.x_far > self.grid.b0:
            raise ConfigError("x_far must exceed b0", "grid.x_far")
        if self.linearized.background not in ("profile", "uniform"):
            raise ConfigError(f"unknown background {self.linearized.background!r}", "linearized.background")

    def as_dict(self) -> dict:
        c = self.constants
        return {"experiment": self.experiment, "suite": self.suite, "seed": self.seed,
                "constants": {"kappa": c.kappa, "tau_pi": c.tau_pi, "lambda0": c.lambda0, "zeta0": c.zeta0},
                "grid": {"n_cells": self.grid.n_cells, "b0": self.grid.b0, "x_far": self.grid.x_far},
                "time": {"T": self.T, "cfl": self.cfl},
                "evolution": {"far_bc": self.evolution.far_bc, "move_boundary": self.evolution.move_boundary,
                              "snapshot_every": self.evolution.snapshot_every,
                              "accuracy": self.evolution.accuracy},
                "profile": {f.name: getattr(self.profile, f.name) for f in fields(VacuumProfile)},
                "linearized": {f.name: getattr(self.linearized, f.name) for f in fields(LinearizedConfig)}}


def _convert(section: str, key: str, raw: str, kind: type, parser: configparser.ConfigParser):
    name = f"{section}.{key}"
    try:
        if kind is bool:
            return parser.getboolean(section, key)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {kind.__name__}", name) from exc


def parse_config(text: str, experiment: str | None = None) -> RunConfig:
    """Parse and validate configuration text; ``experiment`` overrides ``run.experiment``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (T)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError("unknown section", section)
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError("unknown key", f"{section}.{key}")
            values[section][key] = _convert(section, key, raw, SCHEMA[section][key], parser)
    run = values.get("run", {})
    if experiment is not None:
        run["experiment"] = experiment
    if "experiment" not in run:
        raise ConfigError("missing required key", "run.experiment")
    tm = values.get("time", {})
    cfl = tm.get("cfl", 0.4)
    if not 0 < cfl < 1:
        raise ConfigError(f"cfl must lie in (0, 1), got {cfl}", "time.cfl")
    try:
        constants = ModelConstants(**values.get("constants", {}))
        evolution = EvolutionOptions(**{"cfl": tm.get("cfl", 0.4), **values.get("evolution", {})})
        profile = VacuumProfile(**values.get("profile", {}))
    except IslabError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(experiment=run["experiment"], constants=constants, grid=GridConfig(**values.get("grid", {})),
                     T=tm.get("T", 0.5), cfl=tm.get("cfl", 0.4), suite=run.get("suite"),
                     output_dir=Path(run.get("output_dir", "islab-out")), seed=run.get("seed", DEFAULT_SEED),
                     evolution=evolution, profile=profile, linearized=LinearizedConfig(**values.get("linearized", {})))


def load_config(path: str | Path, experiment: str | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file: {exc.strerror}", str(p)) from exc
    return parse_config(text, experiment)
