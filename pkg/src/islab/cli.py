"""Command-line entry point.

    islab <experiment> --config <file> [--suite <name>] [--out <dir>]
    islab list-suites

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error,
3 numerical abort (non-finite values).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .config import EXPERIMENTS, RunConfig, load_config
from .elliptic import assemble_discrete, elliptic_ratio_test, spectrum
from .errors import ConfigError, IslabError, NumericalAbort, PropagationError
from .grid import MovingGrid
from .io import perturbation_fields, state_fields, write_csv, write_json, write_snapshots
from .linearized import LinearizedState, complete_perturbation, energy_estimate_experiment
from .model import causality_check, inverse_transform
from .nonlinear import FieldState, ManufacturedBackground, simulate
from .profiles import random_smooth_field
from .spaces import base_space_norm, energy_functional
from .suites import Check, SmoothField, SuiteContext, at_least, at_most, list_suites, resolve, run_suites

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3


def thread_cap() -> int:
    """Value of ISLAB_THREADS (default 1).  Runs are sequential; the cap only bounds future parallelism."""
    raw = os.environ.get("ISLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"must be a positive integer, got {raw!r}", "ISLAB_THREADS") from exc
    if n < 1:
        raise ConfigError(f"must be a positive integer, got {raw!r}", "ISLAB_THREADS")
    return n


def make_grid(cfg: RunConfig) -> MovingGrid:
    return MovingGrid(cfg.grid.b0, cfg.grid.x_far, cfg.grid.n_cells)


def seeded_rng(cfg: RunConfig) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(cfg.seed))


def initial_perturbation(cfg: RunConfig, grid: MovingGrid, state: FieldState) -> LinearizedState:
    """Random smooth perturbation from the run seed, vanishing linearly at the edge for r~ and pi~."""
    rng = seeded_rng(cfg)
    lo, hi = grid.b, grid.x_far
    d = grid.nodes - grid.b
    cut = (0.5, 0.8)
    a = cfg.linearized.amplitude
    rt = a * random_smooth_field(rng, grid.nodes, cutoff=cut, lo=lo, hi=hi) * d
    ut = a * random_smooth_field(rng, grid.nodes, cutoff=cut, lo=lo, hi=hi)
    pt = a * random_smooth_field(rng, grid.nodes, cutoff=cut, lo=lo, hi=hi) * d
    return LinearizedState(rt, complete_perturbation(state.u, ut[None]), pt, state.transformed)


def background(cfg: RunConfig) -> ManufacturedBackground:
    if cfg.linearized.background == "uniform":
        r0, p0 = cfg.linearized.r0, cfg.linearized.pi0
        return ManufacturedBackground(lambda t, x: 0 * x + r0, lambda t, x: 0 * x[None], lambda t, x: 0 * x + p0,
                                      static=True)
    return cfg.profile.background(cfg.grid.b0)


def checks_report(cfg: RunConfig, checks: list[Check], extra: dict | None = None) -> dict:
    report = {"experiment": cfg.experiment, "passed": all(c.passed for c in checks),
              "checks": [c.as_dict() for c in checks]}
    if extra:
        report.update(extra)
    return report


def metadata(cfg: RunConfig, **extra) -> dict:
    return {"version": __version__, "config": cfg.as_dict(), **extra}


def run_simulate_nonlinear(cfg: RunConfig, out: Path) -> list[Check]:
    grid = make_grid(cfg)
    state0 = cfg.profile.state(grid)
    opts = replace(cfg.evolution, cfl=cfg.cfl)
    res = simulate(state0, cfg.constants, cfg.T, opts)
    write_snapshots(out / "snapshots.csv", res.times, [s.grid for s in res.states],
                    [state_fields(s) for s in res.states])
    write_json(out / "metadata.json", metadata(cfg, **res.metadata))
    fin = res.final
    prim = inverse_transform(fin.transformed, cfg.constants)
    margin = causality_check(prim, cfg.constants)[fin.grid.interior_mask]
    finite = all(np.all(np.isfinite(f)) for f in (fin.r, fin.u, fin.pi))
    return [Check("final fields finite", bool(finite), str(finite), "True", "=="),
            at_least("final interior causality margin", float(np.min(margin)), 0.0),
            at_least("final vacuum edge below far edge", fin.grid.x_far - fin.grid.b, 0.0, edge=fin.grid.b)]


def run_simulate_linearized(cfg: RunConfig, out: Path) -> list[Check]:
    grid = make_grid(cfg)
    bg = background(cfg)
    st = bg.state(grid)
    ls0 = initial_perturbation(cfg, grid, st)
    opts = replace(cfg.evolution, cfl=cfg.cfl)
    rep = energy_estimate_experiment(ls0, bg, cfg.constants, cfg.T, grid=grid, opts=opts)
    rows = [[r["t"], r["E"], r["H_norm"], r["source_norm"], r["K_measured"]] for r in rep.rows()]
    write_csv(out / "energy.csv", ["t", "E", "H_norm", "source_norm", "K_measured"], rows)
    write_json(out / "metadata.json", metadata(cfg, **rep.metadata, growth_envelope=rep.growth_envelope,
                                               growth_fit=rep.growth_fit))
    checks = [Check("E(t) <= exp(C t) E(0) with the measured envelope rate", rep.bound_ok, rep.growth_envelope,
                    "envelope", "bound", {"K_measured": rep.K_measured})]
    if cfg.linearized.background == "uniform":
        inc = float(np.max(np.diff(rep.energy)) / rep.energy[0]) if rep.energy[0] > 0 else 0.0
        checks.append(at_most("energy nonincreasing on a gradient-free background", inc, 1e-9))
    return checks


def run_norms(cfg: RunConfig, out: Path) -> list[Check]:
    grid = make_grid(cfg)
    st = cfg.profile.state(grid)
    ls = initial_perturbation(cfg, grid, st)
    norms = base_space_norm(ls, st.transformed, grid, cfg.constants)
    E = energy_functional(ls, st.transformed, cfg.constants, grid)
    record = {"t": 0.0, "E": E, "H_norm": norms.total, **norms.as_dict()}
    write_json(out / "norms.json", [record])
    write_json(out / "metadata.json", metadata(cfg))
    ratio = E / norms.total**2 if norms.total > 0 else float("nan")
    return [at_least("E / ||.||^2 positive", ratio, 0.0), at_most("E / ||.||^2 finite", ratio, 1e12)]


def run_spectrum(cfg: RunConfig, out: Path) -> list[Check]:
    grid = make_grid(cfg)
    st = cfg.profile.state(grid).transformed
    bg = cfg.profile.background(cfg.grid.b0)
    ensemble = [SmoothField(cfg.seed + i, lo=grid.b, hi=grid.x_far) for i in range(50)]
    records, checks = [], []
    for which, sector in (("L1hat", "L1"), ("L23hat", "L23")):
        sr = spectrum(assemble_discrete(which, st, grid, cfg.constants))
        ratio = elliptic_ratio_test(sector, ensemble, bg, grid, cfg.constants)
        records.append(sr.as_dict(max_ratio=ratio.max_ratio))
        checks.append(at_most(f"{which} symmetry defect", sr.sym_defect, 1e-12))
        checks.append(at_least(f"{which} min eigenvalue / norm", sr.min_eig / sr.norm, -1e-8))
    write_json(out / "spectrum.json", records)
    write_json(out / "metadata.json", metadata(cfg))
    return checks


def run_verify(cfg: RunConfig, out: Path) -> list[Check]:
    names = resolve(cfg.suite or "all")
    results = run_suites(names, SuiteContext(seed=cfg.seed))
    write_json(out / "suites.json", [r.as_dict() for r in results])
    write_json(out / "metadata.json", metadata(cfg, suites=names))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} suite {r.name} ({r.anchor})")
    return [c for r in results for c in r.checks]


RUNNERS: dict[str, Callable[[RunConfig, Path], list[Check]]] = {
    "simulate-nonlinear": run_simulate_nonlinear,
    "simulate-linearized": run_simulate_linearized,
    "verify": run_verify,
    "spectrum": run_spectrum,
    "norms": run_norms,
}


def run(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        checks = RUNNERS[cfg.experiment](cfg, out)
    except (NumericalAbort, PropagationError) as exc:
        write_json(out / "report.json", {"experiment": cfg.experiment, "passed": False, "abort": str(exc)})
        print(f"islab: numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    write_json(out / "report.json", checks_report(cfg, checks))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value} {c.relation} {c.threshold}")
    return EXIT_PASS if all(c.passed for c in checks) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="islab", description="Israel-Stewart bulk-viscosity vacuum-boundary lab")
    p.add_argument("experiment", choices=(*EXPERIMENTS, "list-suites"))
    p.add_argument("--config", type=Path, help="INI run configuration")
    p.add_argument("--suite", help="verification suite name or 'all'")
    p.add_argument("--out", type=Path, help="output directory (overrides run.output_dir)")
    p.add_argument("--version", action="version", version=f"islab {__version__}")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.experiment == "list-suites":
        print(list_suites())
        return EXIT_PASS
    try:
        thread_cap()
        if args.config is None:
            raise ConfigError("required for experiments", "--config")
        cfg = load_config(args.config, args.experiment)
        if args.suite is not None:
            cfg = replace(cfg, suite=args.suite)
        if args.out is not None:
            cfg = replace(cfg, output_dir=args.out)
        if cfg.suite is not None and cfg.experiment == "verify":
            try:
                resolve(cfg.suite)
            except KeyError as exc:
                raise ConfigError(f"unknown suite {cfg.suite!r}", "run.suite") from exc
    except ConfigError as exc:
        print(f"islab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except IslabError as exc:
        print(f"islab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
