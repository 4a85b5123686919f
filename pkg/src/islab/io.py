"""Deterministic report emission: CSV with 17 significant digits, JSON with sorted keys."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .grid import MovingGrid
from .linearized import LinearizedState
from .nonlinear import FieldState

REAL_FORMAT = "%.17g"


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return REAL_FORMAT % float(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def _clean(obj):
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(data), fh, sort_keys=True, indent=2)
        fh.write("\n")


def snapshot_rows(t: float, grid: MovingGrid, fields: Mapping[str, np.ndarray]):
    x = grid.nodes
    mask = grid.interior_mask
    for i in range(x.size):
        yield [t, x[i], *(f[i] for f in fields.values()), bool(mask[i])]


def state_fields(state: FieldState) -> dict[str, np.ndarray]:
    out = {"r": state.r}
    for a in range(state.u.shape[0]):
        out[f"u{a}"] = state.u[a]
    out["pi"] = state.pi
    return out


def perturbation_fields(ls: LinearizedState) -> dict[str, np.ndarray]:
    out = {"r_t": ls.r_t}
    for a in range(ls.u_t.shape[0]):
        out[f"u{a}_t"] = ls.u_t[a]
    out["pi_t"] = ls.pi_t
    return out


def write_snapshots(path: Path, times: Sequence[float], grids: Sequence[MovingGrid],
                    fields: Sequence[Mapping[str, np.ndarray]]) -> None:
    header = ["t", "x", *fields[0].keys(), "interior"]
    rows = (row for t, g, f in zip(times, grids, fields) for row in snapshot_rows(t, g, f))
    write_csv(path, header, rows)
