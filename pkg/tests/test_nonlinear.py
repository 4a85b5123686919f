import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from islab.errors import DomainError, LinearSolveError
from islab.grid import MovingGrid
from islab.model import ModelConstants, TransformedState, normalize_velocity
from islab.nonlinear import (EvolutionOptions, FieldState, ManufacturedBackground, Gradients, assemble_matrices,
                             coefficient_bound_experiment, coefficient_ode_rhs, manufactured_residual, nonlinear_rhs,
                             recover_time_derivatives, simulate, solve_nodes, spatial_gradients)
from islab.profiles import VacuumProfile
from islab.suites import formulation_consistency

C1 = ModelConstants(kappa=1.0)


def uniform(n, r0, p0, v=0.0):
    return FieldState.from_spatial(MovingGrid(0.0, 1.0, n), np.full(n, r0), np.full((1, n), v), np.full(n, p0))


def test_static_relaxation_rate():
    # at rest with no gradients: D_t pi = -pi - lambda pi^(3 + 1/k)
    s = uniform(20, 0.3, 0.2)
    td = recover_time_derivatives(s.transformed, spatial_gradients(s), C1)
    expected = -0.2 - (1 / 1.3) * 0.2**4
    np.testing.assert_allclose(td.pi, expected, rtol=1e-14)
    assert np.max(np.abs(td.r)) <= 1e-13 and np.max(np.abs(td.u[1:])) <= 1e-13


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.05, 2.0), st.floats(-0.5, 0.5), st.sampled_from([0.5, 1.0, 2.0]))
def test_A0_inverse(r, p, v, k):
    ts = TransformedState(np.array([r]), normalize_velocity(np.array([[v]])), np.array([p]))
    m = assemble_matrices(ts, ModelConstants(kappa=k))
    np.testing.assert_allclose(m.A0[0] @ m.inverse_A0()[0], np.eye(4), atol=1e-10)


def test_A0_determinant_small_states():
    rng = np.random.Generator(np.random.Philox(11))
    r = rng.uniform(1e-3, 0.1, 200)
    ts = TransformedState(r, normalize_velocity(rng.uniform(-0.2, 0.2, (1, 200))), r * rng.uniform(0.5, 2, 200))
    assert np.min(np.linalg.det(assemble_matrices(ts, C1).A0)) >= 0.5


def test_solve_nodes_rejects_singular():
    A = np.zeros((2, 3, 3))
    A[0] = np.eye(3)
    with pytest.raises(LinearSolveError):
        solve_nodes(A, np.ones((2, 3)))


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_formulation_consistency(k):
    prof = VacuumProfile(u_amp=0.1, a0_amp=0.3, bump=0.1)
    assert formulation_consistency(prof.state(MovingGrid(0.0, 1.0, 80)), ModelConstants(kappa=k)) <= 1e-10


def test_rhs_zero_for_constant_equilibrium():
    s = uniform(10, 0.5, 0.0, v=0.2)
    z = np.zeros((2, 10))
    out = nonlinear_rhs(s.transformed, Gradients(z, np.zeros((2, 2, 10)), z), C1)
    assert np.all(out.dr == 0) and np.all(out.du == 0) and np.all(out.dpi == 0)


def test_static_equilibrium_preserved():
    out = simulate(uniform(16, 0.3, 0.0), C1, 0.2, EvolutionOptions(move_boundary=False)).final
    assert np.max(np.abs(out.r - 0.3)) <= 1e-12 and np.max(np.abs(out.pi)) <= 1e-12


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_homogeneous_relaxation_matches_ode(k):
    c = ModelConstants(kappa=k)
    r0, p0 = 0.2, 0.2
    out = simulate(uniform(16, r0, p0), c, 0.5, EvolutionOptions(move_boundary=False)).final
    lam, s = float(c.lam(r0 ** (1 / k))), c.relaxation_factor
    ref = solve_ivp(lambda t, y: -s * (y + lam * y ** (3 + 1 / k)), (0, 0.5), [p0], method="DOP853",
                    rtol=1e-13, atol=1e-15).y[0, -1]
    assert np.max(np.abs(out.pi - ref)) <= 1e-8
    assert np.max(np.abs(out.r - r0)) <= 1e-12


def test_simulate_validation():
    s = uniform(16, 0.3, 0.1)
    with pytest.raises(DomainError):
        simulate(s, C1, 0.0)
    with pytest.raises(DomainError):
        EvolutionOptions(cfl=1.5)
    with pytest.raises(DomainError):
        EvolutionOptions(far_bc="open")
    # rho = 1 with tau = 1/3 violates causality
    with pytest.raises(DomainError):
        simulate(uniform(16, 1.0, 0.5), ModelConstants(kappa=1.0, tau_pi=1 / 3), 0.1)


def test_simulate_lands_on_final_time_and_moves_edge():
    prof = VacuumProfile(u_amp=0.1)
    res = simulate(prof.state(MovingGrid(0.0, 1.0, 60)), C1, 0.1)
    assert abs(res.final.t - 0.1) < 1e-14 and res.steps * res.dt == pytest.approx(0.1)
    assert res.final.grid.b != 0.0 and res.metadata["far_boundary"] == "pinned"


def test_coefficient_rates_hand_value():
    one = np.ones(1)
    pr = coefficient_ode_rhs(one, one, one, np.zeros(1), ModelConstants(kappa=1.0, lambda0=0.0), form="printed")
    assert abs(pr.d_a0[0] - 2.0) <= 1e-14
    dr = coefficient_ode_rhs(one, one, one, np.zeros(1), ModelConstants(kappa=1.0, lambda0=0.0))
    assert abs(dr.d_a0[0] + 1.0) <= 1e-14 and abs(dr.d_inv_a0[0] - 1.0) <= 1e-14
    with pytest.raises(DomainError):
        coefficient_ode_rhs(one, one, one, one, C1, form="other")


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.05, 2.0), st.floats(-1, 1), st.sampled_from([0.5, 1.0, 2.0]))
def test_derived_rates_follow_chain_rule(r, p, div, k):
    # D_t(pi/r) from the r and pi equations must equal the derived a0 rate
    c = ModelConstants(kappa=k)
    ts = TransformedState(np.array([r]), normalize_velocity(np.zeros((1, 1))), np.array([p]))
    gu = np.zeros((2, 2, 1))
    gu[1, 1] = div
    rhs = nonlinear_rhs(ts, Gradients(np.zeros((2, 1)), gu, np.zeros((2, 1))), c)
    chain = (rhs.dpi[0] * r - p * rhs.dr[0]) / r**2
    rates = coefficient_ode_rhs(np.array([p / r]), ts.r, ts.pi, np.array([div]), c)
    assert abs(rates.d_a0[0] - chain) <= 1e-10 * (1 + abs(chain))
    a0 = p / r
    assert abs(rates.d_a0[0] / a0 + a0 * rates.d_inv_a0[0]) <= 1e-10 * (1 + abs(rates.d_a0[0] / a0))


def test_manufactured_residual():
    g = MovingGrid(0.0, 1.0, 40)
    eq = ManufacturedBackground(lambda t, x: 0 * x + 0.4, lambda t, x: 0 * x[None] + 0.1, lambda t, x: 0 * x, static=True)
    assert manufactured_residual(eq, g, C1).max_abs() <= 1e-14
    # pi = pi0 e^{-t} misses the nonlinear relaxation term
    c = ModelConstants(kappa=1.0)
    fake = ManufacturedBackground(lambda t, x: 0 * x + 0.4, lambda t, x: 0 * x[None], lambda t, x: 0 * x + 0.3 * np.exp(-t))
    lam = float(c.lam(0.4))
    assert abs(manufactured_residual(fake, g, c).max_abs() - lam * 0.3**4) <= 1e-8


def test_coefficient_bound_experiment_profile():
    rep = coefficient_bound_experiment(VacuumProfile(a0_amp=0.2).state(MovingGrid(0.0, 1.0, 60)), C1)
    assert rep.passed and rep.simulated_to >= rep.T_star and rep.max_ratio <= 2.0
