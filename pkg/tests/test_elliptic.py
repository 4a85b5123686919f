import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from islab.errors import DegeneracyError, DomainError
from islab.elliptic import (apply_L1_hat, apply_L1_tilde, apply_L2_tilde, apply_L3_tilde, assemble_discrete,
                            curl_annihilation_check, elliptic_ratio_test, principal_part_defect, ratio_specs,
                            rayleigh_quotients, solve_shifted, spectrum)
from islab.grid import BoxGrid, MovingGrid
from islab.model import ModelConstants, TransformedState, normalize_velocity
from islab.nonlinear import ManufacturedBackground
from islab.suites import ELLIPTIC_PROFILE, SmoothField, box_background

C1 = ModelConstants(kappa=1.0)
G = MovingGrid(0.0, 1.0, 60)
X = G.nodes
REST = TransformedState(X, normalize_velocity(np.zeros((1, X.size))), 0.5 * X)


def test_L1_hand_values():
    assert np.max(np.abs(apply_L1_tilde(np.full(X.size, 2.0), REST, G, C1))) <= 1e-9
    # r = x, kappa = 1: 2 (x f'' + f') with f = x^2 gives 8x
    np.testing.assert_allclose(apply_L1_tilde(X**2, REST, G, C1), 8 * X, atol=1e-10)
    np.testing.assert_allclose(apply_L1_hat(X**2, REST, G, C1), 8 * X, atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_L1_linearity(seed, a, b):
    f, g = SmoothField(seed)(X), SmoothField(seed + 1)(X)
    lhs = apply_L1_tilde(a * f + b * g, REST, G, C1)
    rhs = a * apply_L1_tilde(f, REST, G, C1) + b * apply_L1_tilde(g, REST, G, C1)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * (1 + np.max(np.abs(lhs)))


def test_L1_hat_matches_tilde_for_kappa1_at_rest():
    # kappa = 1 in 1D at rest: 2 d(r d f) = 2 (r f'' + r' f'); the two stencils differ at truncation order
    diffs = []
    for n in (60, 120):
        g = MovingGrid(0.0, 1.0, n)
        x = g.nodes
        bg = TransformedState(x, normalize_velocity(np.zeros((1, n))), 0.5 * x)
        f = np.sin(3 * x) + x**3
        diffs.append(np.max(np.abs(apply_L1_hat(f, bg, g, C1) - apply_L1_tilde(f, bg, g, C1))))
    assert diffs[1] < 1e-3 and diffs[0] / diffs[1] > 6


def test_L2_hand_value_3d():
    # rest, r = x1, kappa = 1, u~ = (x1^2, 0, 0): (L2~)_1 = 2 (d_1(2 x1^2) + d_1 x1^2) = 12 x1
    B = BoxGrid.cube(8)
    Xb = B.nodes
    bg = TransformedState(Xb[0], normalize_velocity(np.zeros((3,) + B.shape)), Xb[0])
    ut = np.stack([0 * Xb[0], Xb[0] ** 2, 0 * Xb[0], 0 * Xb[0]])
    out = apply_L2_tilde(ut, bg, B, C1)
    np.testing.assert_allclose(out[1], 12 * Xb[0], atol=1e-9)
    assert np.max(np.abs(out[[0, 2, 3]])) <= 1e-9


def test_L3_zero_in_1d():
    ut = np.stack([0 * X, np.sin(3 * X)])
    assert np.max(np.abs(apply_L3_tilde(ut, REST, G, C1))) == 0.0


def test_principal_parts_agree():
    rng = np.random.Generator(np.random.Philox(5))
    assert principal_part_defect("L1", REST, G, C1, rng) <= 1e-9
    assert principal_part_defect("L23", REST, G, C1, rng) <= 1e-9


@pytest.mark.parametrize("which", ["L1hat", "L23hat"])
@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_assembly_symmetric_nonnegative(which, k):
    g = MovingGrid(0.0, 1.0, 120)
    op = assemble_discrete(which, ELLIPTIC_PROFILE.state(g).transformed, g, ModelConstants(kappa=k))
    sr = spectrum(op)
    assert sr.sym_defect <= 1e-12 and sr.min_eig / sr.norm >= -1e-8
    rng = np.random.Generator(np.random.Philox(9))
    assert rayleigh_quotients(op, rng.normal(size=(50, op.size))).min() >= -1e-8
    f, h = rng.normal(size=op.size), rng.normal(size=op.size)
    assert op.inner(op.action(f), h) == pytest.approx(op.inner(f, op.action(h)), rel=1e-10)


def test_assembly_kernel_and_refusal():
    st_ = ELLIPTIC_PROFILE.state(G).transformed
    op = assemble_discrete("L1hat", st_, G, C1)
    assert np.max(np.abs(op.K @ np.ones(op.size))) <= 1e-12 * np.max(np.abs(op.K).sum(axis=1))
    bad = TransformedState(X - X[0], st_.u, st_.pi)
    with pytest.raises(DegeneracyError):
        assemble_discrete("L1hat", bad, G, C1)


def test_assembly_3d():
    B, bg3 = box_background(8, moving=True)
    for which in ("L1hat", "L23hat"):
        sr = spectrum(assemble_discrete(which, bg3, B, C1))
        assert sr.sym_defect <= 1e-12 and sr.min_eig / sr.norm >= -1e-8


@pytest.mark.parametrize("which", ["L1hat", "L23hat"])
def test_solve_shifted(which):
    op = assemble_discrete(which, ELLIPTIC_PROFILE.state(G).transformed, G, C1)
    assert np.all(solve_shifted(op, np.zeros(op.size)) == 0)
    xs = np.random.Generator(np.random.Philox(2)).normal(size=op.size)
    x = solve_shifted(op, xs + op.action(xs), rtol=1e-12)
    assert np.linalg.norm(x - xs) / np.linalg.norm(xs) <= 1e-9
    with pytest.raises(DomainError):
        solve_shifted(op, np.full(op.size, np.nan))


def test_ratio_specs():
    num, den = ratio_specs("L1", 1.0)
    assert (num.j, num.sigma, den.j, den.sigma) == (2, 1.0, 0, 0.0)
    num, den = ratio_specs("L23", 2.0)
    assert (num.j, num.sigma, den.j, den.sigma) == (2, 1.25, 0, 0.25)


def test_ratio_test_excludes_zero_fields():
    bg = ELLIPTIC_PROFILE.background()
    ens = [SmoothField(1), lambda x: 0 * x, SmoothField(2)]
    rep = elliptic_ratio_test("L1", ens, bg, MovingGrid(0.0, 1.0, 80), C1)
    assert rep.excluded == 1 and rep.ratios.size == 2 and np.all(np.isfinite(rep.ratios))
    assert rep.as_dict()["excluded"] == 1
    with pytest.raises(DomainError):
        elliptic_ratio_test("L1", [], bg, G, C1)


def test_ratio_trend_small():
    rest = ManufacturedBackground(lambda t, x: x, lambda t, x: 0 * x[None], lambda t, x: 0.5 * x, static=True)
    rep = elliptic_ratio_test("L23", [SmoothField(i) for i in range(5)], rest, MovingGrid(0.0, 1.0, 100), C1)
    assert rep.trend <= 0.25


def test_curl_annihilation():
    B, bg3 = box_background(12, moving=True)
    phi = lambda Y: Y[0] ** 2 + Y[0] * Y[1] - Y[2] ** 2
    grad = lambda Y: np.stack([2 * Y[0] + Y[1], Y[0], -2 * Y[2]])
    assert curl_annihilation_check(phi, bg3, B, C1, grad) <= 1e-11
    assert curl_annihilation_check(phi, bg3, B, C1) <= 1e-10
    # directional stencils commute, so discrete gradients of any field are annihilated up to roundoff
    for n in (12, 24):
        Bn, bgn = box_background(n, moving=True)
        assert curl_annihilation_check(lambda Y: np.sin(2 * Y[0]) * np.cos(Y[1] + Y[2]), bgn, Bn, C1) <= 1e-9
