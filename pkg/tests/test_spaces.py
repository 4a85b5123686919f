import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from islab.errors import WeightSpecError
from islab.grid import MovingGrid
from islab.linearized import LinearizedState, complete_perturbation
from islab.model import ModelConstants, TransformedState, normalize_velocity
from islab.profiles import VacuumProfile, random_smooth_field
from islab.spaces import (WeightedNormSpec, base_space_norm, embedding_ratio, energy_equivalence_check,
                          energy_functional, high_order_norm, high_order_specs, hjsigma_norm)

G = MovingGrid(0.0, 1.0, 400)
X = G.nodes


def rest_background(r, pi=None):
    return TransformedState(r, normalize_velocity(np.zeros((1, r.size))), r if pi is None else pi)


def test_spec_validation():
    with pytest.raises(WeightSpecError):
        WeightedNormSpec(-1, 0.0)
    with pytest.raises(WeightSpecError):
        WeightedNormSpec(0, -0.5)


def test_hjsigma_hand_values():
    assert hjsigma_norm(0 * X, WeightedNormSpec(0, 0.5), X, G) == 0
    assert abs(hjsigma_norm(1 + 0 * X, WeightedNormSpec(0, 0.5), X, G) - np.sqrt(0.5)) < 1e-5
    assert abs(hjsigma_norm(X, WeightedNormSpec(1, 0.0), X, G) - np.sqrt(4 / 3)) < 1e-5


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.25, 0.5, 1.0]))
def test_norm_monotone_in_j(seed, sigma):
    f = random_smooth_field(np.random.Generator(np.random.Philox(seed)), X)
    vals = [hjsigma_norm(f, WeightedNormSpec(j, sigma), X, G) for j in range(3)]
    assert vals[0] <= vals[1] <= vals[2]


def test_base_space_norm_values():
    c = ModelConstants(kappa=1.0)
    bg = rest_background(X)
    zero = LinearizedState(0 * X, np.zeros((2, X.size)), 0 * X, bg)
    rep = base_space_norm(zero, bg, G, c)
    assert (rep.r_norm, rep.u_norm, rep.pi_norm, rep.total) == (0, 0, 0, 0)
    one = LinearizedState(1 + 0 * X, np.zeros((2, X.size)), 0 * X, bg)
    assert abs(base_space_norm(one, bg, G, c).r_norm - 1.0) < 1e-12
    # kappa = 1: plain L2 for r~ and r-weighted L2 for pi~
    p = LinearizedState(0 * X, np.zeros((2, X.size)), 1 + 0 * X, bg)
    assert abs(base_space_norm(p, bg, G, c).pi_norm - np.sqrt(0.5)) < 1e-5


def test_high_order_norm():
    c = ModelConstants(kappa=1.0)
    assert [(s.j, s.sigma) for s in high_order_specs(1.0, 0)] == [(0, 0.0), (0, 0.5), (0, 0.5)]
    assert [(s.j, s.sigma) for s in high_order_specs(2.0, 0)] == [(0, -0.25), (0, 0.25), (0, 0.25)]
    bg = rest_background(X)
    z = np.zeros((2, X.size))
    assert high_order_norm(LinearizedState(0 * X, z, 0 * X, bg), 1, bg, G, c).total == 0
    # r~ = x^2 in H^{2,1}: int x^2 (x^4 + 4x^2 + 4) = 1/7 + 4/5 + 4/3
    rep = high_order_norm(LinearizedState(X**2, z, 0 * X, bg), 1, bg, G, c)
    assert [(s.j, s.sigma) for s in rep.specs] == [(2, 1.0), (2, 1.5), (2, 1.5)]
    assert abs(rep.r_norm - np.sqrt(1 / 7 + 4 / 5 + 4 / 3)) < 1e-4
    with pytest.raises(WeightSpecError):
        high_order_norm(LinearizedState(X, z, X, bg), -1, bg, G, c)


def test_energy_values():
    c = ModelConstants(kappa=1.0)
    bg = rest_background(X, 0.8 * X)
    z = np.zeros((2, X.size))
    assert energy_functional(LinearizedState(0 * X, z, 0 * X, bg), bg, c, G) == 0
    rt = np.cos(3 * X)
    E = energy_functional(LinearizedState(rt, z, 0 * X, bg), bg, c, G)
    assert abs(E - 0.5 * G.h * np.sum(rt**2)) < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0]))
def test_energy_nonnegative_for_orthogonal_states(seed, k):
    rng = np.random.Generator(np.random.Philox(seed))
    g = MovingGrid(0.0, 1.0, 60)
    st_ = VacuumProfile(u_tilt=0.3, a0_amp=0.3).state(g)
    ls = LinearizedState(random_smooth_field(rng, g.nodes), complete_perturbation(st_.u, random_smooth_field(rng, g.nodes)[None]),
                         random_smooth_field(rng, g.nodes), st_.transformed)
    assert energy_functional(ls, st_.transformed, ModelConstants(kappa=k), g) >= 0


def test_embedding_ratio():
    with pytest.raises(WeightSpecError):
        embedding_ratio(1 + 0 * X, WeightedNormSpec(1, 0.5), WeightedNormSpec(0, -0.25), X, G)
    with pytest.raises(WeightSpecError):
        embedding_ratio(1 + 0 * X, WeightedNormSpec(0, 1.0), WeightedNormSpec(0, 0.0), X, G)
    # f = 1 on r = x: ||f||_{H^{0,0}} / ||f||_{H^{1,1}} = 1 / sqrt(1/3)
    ratio = embedding_ratio(1 + 0 * X, WeightedNormSpec(1, 1.0), WeightedNormSpec(0, 0.0), X, G)
    assert abs(ratio - np.sqrt(3)) < 1e-4


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_embedding_ratio_refinement_stable(seed):
    vals = []
    for n in (100, 200):
        g = MovingGrid(0.0, 1.0, n)
        f = random_smooth_field(np.random.Generator(np.random.Philox(seed)), g.nodes)
        vals.append(embedding_ratio(f, WeightedNormSpec(2, 1.5), WeightedNormSpec(1, 0.5), g.nodes, g))
    assert np.isfinite(vals[0]) and abs(vals[1] - vals[0]) <= 0.2 * vals[0]


def test_energy_equivalence():
    c = ModelConstants(kappa=1.0)
    st_ = VacuumProfile(a0_amp=0.3).state(G)
    bg = st_.transformed
    z = np.zeros_like(st_.u)
    r_only = [LinearizedState(np.sin(m * X), z, 0 * X, bg) for m in (1, 2)]
    lo, hi = energy_equivalence_check(r_only + [LinearizedState(0 * X, z, 0 * X, bg)], bg, c, G)
    assert abs(lo - 0.5) < 1e-12 and abs(hi - 0.5) < 1e-12
    with pytest.raises(WeightSpecError):
        energy_equivalence_check([LinearizedState(0 * X, z, 0 * X, bg)], bg, c, G)
    rng = np.random.Generator(np.random.Philox(3))
    full = [LinearizedState(random_smooth_field(rng, X), complete_perturbation(st_.u, random_smooth_field(rng, X)[None]),
                            random_smooth_field(rng, X), bg) for _ in range(20)]
    lo, hi = energy_equivalence_check(full, bg, c, G)
    assert 0 < lo <= hi < np.inf
