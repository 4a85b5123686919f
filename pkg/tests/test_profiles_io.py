import json

import numpy as np
from hypothesis import given, settings, strategies as st

from islab.grid import MovingGrid
from islab.io import format_value, state_fields, write_csv, write_json, write_snapshots
from islab.model import ModelConstants, causality_check, fit_decay_exponents, inverse_transform
from islab.profiles import VacuumProfile, flat_ramp, flat_weight, random_profile, random_smooth_field, smooth_cutoff


def test_flat_ramp_and_weight():
    s = np.array([0.0, 1e-4, 1.0, 1.5])
    w = flat_weight(s)
    assert w[0] == 1.0 and w[2] == 0.0 and w[3] == 0.0
    ramp = flat_ramp(s)
    assert ramp[0] == 0.0 and abs(ramp[1] / 1e-4 - 1) < 1e-6 and ramp[2] == ramp[3]


def test_profile_vanishes_linearly_and_flattens():
    p = VacuumProfile(a0_amp=0.3, bump=0.1, u_tilt=0.2)
    d = np.geomspace(1e-5, 1e-3, 12)
    assert abs(fit_decay_exponents(p.r(d), d)[0] - 1) < 1e-3
    assert abs(fit_decay_exponents(p.pi(d), d)[0] - 1) < 1e-3
    far = np.array([0.65, 0.8, 1.0])
    assert np.ptp(p.r(far)) == 0 and np.ptp(p.pi(far)) == 0 and np.ptp(p.velocity(far)) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_random_profiles_are_admissible(seed):
    p = random_profile(np.random.Generator(np.random.Philox(seed)))
    g = MovingGrid(0.0, 1.0, 80)
    s = p.state(g)
    a0 = s.pi / s.r
    assert a0.min() >= 0.5 and a0.max() <= 2.0
    c = ModelConstants(kappa=1.0)
    assert np.min(causality_check(inverse_transform(s.transformed, c), c)) >= 0


def test_background_matches_state():
    p = VacuumProfile(u_amp=0.1)
    g = MovingGrid(0.1, 1.0, 40)
    a, b = p.state(g), p.background(0.1).state(g)
    np.testing.assert_array_equal(a.r, b.r)
    np.testing.assert_array_equal(a.u, b.u)


def test_smooth_cutoff_and_fields():
    x = np.linspace(0, 1, 101)
    c = smooth_cutoff(x, 0.6, 0.9)
    assert np.all(c[x <= 0.6] == 1) and np.all(c[x >= 0.9] == 0) and np.all(np.diff(c) <= 0)
    f1 = random_smooth_field(np.random.Generator(np.random.Philox(4)), x, cutoff=(0.6, 0.9))
    f2 = random_smooth_field(np.random.Generator(np.random.Philox(4)), x, cutoff=(0.6, 0.9))
    np.testing.assert_array_equal(f1, f2)
    assert np.all(f1[x >= 0.9] == 0)


def test_format_value():
    assert format_value(True) == "1" and format_value(np.bool_(False)) == "0" and format_value(3) == "3"
    assert float(format_value(0.1)) == 0.1 and format_value(1 / 3) == "0.33333333333333331"


def test_csv_and_json(tmp_path):
    write_csv(tmp_path / "a.csv", ["t", "E"], [[0.0, 1.5], [0.1, 2.0]])
    assert (tmp_path / "a.csv").read_text() == "t,E\n0,1.5\n0.10000000000000001,2\n"
    write_json(tmp_path / "a.json", {"b": np.float64(np.inf), "a": np.arange(2), "c": np.bool_(True)})
    data = json.loads((tmp_path / "a.json").read_text())
    assert data == {"a": [0, 1], "b": "inf", "c": True}
    assert (tmp_path / "a.json").read_text().index('"a"') < (tmp_path / "a.json").read_text().index('"b"')


def test_snapshots(tmp_path):
    g = MovingGrid(0.0, 1.0, 8)
    s = VacuumProfile().state(g)
    write_snapshots(tmp_path / "s.csv", [0.0], [g], [state_fields(s)])
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t,x,r,u0,u1,pi,interior" and len(lines) == 9
    assert lines[1].endswith(",0") and lines[3].endswith(",1")
