from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from islab.analysis import (BOOKKEEPING_DISPLAYS, GronwallInput, TermDescriptor, convergence_order, display_order,
                            equality_solution, gronwall_bound, gronwall_verify, loglog_slope,
                            material_derivative_orders, order_balance_check, product_order, term_order)
from islab.errors import DomainError


def test_gronwall_trivial_cases():
    assert gronwall_bound(GronwallInput(0.0, 0.0, 2.0, 0.5, 1.0), 0.7) == pytest.approx(2.0, rel=1e-14)
    assert gronwall_bound(GronwallInput(0.3, 0.0, 2.0, 0.5, 1.0), 1.0) == pytest.approx(2.0 * np.exp(0.3), rel=1e-12)
    # a = 0: d^(1 - alpha) = c^(1 - alpha) + (1 - alpha) b t
    assert gronwall_bound(GronwallInput(0.0, 0.4, 1.0, 0.5, 1.0), 1.0) == pytest.approx((1 + 0.5 * 0.4) ** 2, rel=1e-12)


def test_gronwall_constant_coefficients_closed_form():
    a, b, c, al = 0.8, 0.5, 1.5, 0.3
    p = 1 - al
    t = 0.9
    ref = (c**p * np.exp(p * a * t) + b / a * (np.exp(p * a * t) - 1)) ** (1 / p)
    assert gronwall_bound(GronwallInput(a, b, c, al, 1.0), t) == pytest.approx(ref, rel=1e-10)


def test_gronwall_small_b_limit():
    inp = GronwallInput(lambda t: 1 + np.sin(t) ** 2, 1e-12, 1.0, 0.5, 1.0)
    classical = np.exp(1 + (1 - np.sin(2) / 2) / 2)
    assert gronwall_bound(inp, 1.0) == pytest.approx(classical, rel=1e-9)


def test_gronwall_validation():
    with pytest.raises(DomainError):
        GronwallInput(0, 0, 1, 1.0, 1.0)
    with pytest.raises(DomainError):
        GronwallInput(0, 0, 1, 0.5, 0.0)
    with pytest.raises(DomainError):
        gronwall_bound(GronwallInput(0, 0, 1, 0.5, 1.0), 2.0)


def test_gronwall_arrays_and_samples():
    inp = GronwallInput(np.full(11, 0.2), 0.1, 1.0, 0.5, 1.0)
    vals = gronwall_bound(inp, np.linspace(0, 1, 5))
    assert vals.shape == (5,) and np.all(np.diff(vals) > 0) and vals[0] == 1.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2), st.floats(0, 2), st.floats(0.1, 3), st.floats(0.1, 0.9))
def test_equality_case_saturates_bound(a, b, c, al):
    inp = GronwallInput(a, b, c, al, 1.0)
    t = np.linspace(0, 1, 9)
    d = equality_solution(inp, t)
    np.testing.assert_allclose(d, gronwall_bound(inp, t), rtol=1e-7)


def test_gronwall_verify_small():
    rep = gronwall_verify(trials=5, seed=3)
    assert rep.passed and rep.max_saturation_gap <= 1e-6 and rep.as_dict()["trials"] == 5


# ---------------------------------------------------------------- orders

def test_term_order_values():
    assert term_order(TermDescriptor("r")) == 0
    assert term_order(TermDescriptor("u")) == Fraction(1, 2)
    assert term_order(TermDescriptor("pi", a=1, b=1)) == Fraction(1, 2)
    assert term_order(TermDescriptor("r", b=2, dt_count=1)) == Fraction(5, 2)
    assert term_order(TermDescriptor("r").d().times_r().material()) == Fraction(1, 2)
    with pytest.raises(DomainError):
        TermDescriptor("v")
    with pytest.raises(DomainError):
        TermDescriptor("r", a=0.5)


variables = st.sampled_from(["r", "u", "pi"])
terms = st.builds(TermDescriptor, variables, st.integers(0, 4), st.integers(0, 4), st.integers(0, 3))


@settings(max_examples=100, deadline=None)
@given(terms, st.integers(0, 3), st.integers(0, 3))
def test_order_shifts(t, m, n):
    # each spatial derivative adds one, each power of r removes one, each D_t adds one half
    assert term_order(t.d(m)) == term_order(t) + m
    assert term_order(t.times_r(n)) == term_order(t) - n
    assert term_order(t.material(m)) == term_order(t) + Fraction(m, 2)


@settings(max_examples=100, deadline=None)
@given(st.lists(terms, min_size=1, max_size=5), st.lists(terms, min_size=1, max_size=5))
def test_product_order_additive(xs, ys):
    assert product_order(xs + ys) == product_order(xs) + product_order(ys)
    assert display_order(xs) >= min(term_order(t) for t in xs)


def test_balance_and_display():
    assert material_derivative_orders() == {"D_t r": Fraction(1, 2), "D_t u": Fraction(1), "D_t pi": Fraction(1, 2)}
    assert set(BOOKKEEPING_DISPLAYS) == {"D_t r", "D_t u", "D_t pi"}
    assert order_balance_check(Fraction(1), [TermDescriptor("r", b=1), TermDescriptor("u")])
    assert not order_balance_check(Fraction(1, 2), [TermDescriptor("r", b=2)])
    assert order_balance_check(TermDescriptor("r", b=1), [TermDescriptor("pi", a=1, b=1)])
    with pytest.raises(DomainError):
        display_order([])


def test_helpers():
    x = np.array([1.0, 2.0, 4.0])
    assert loglog_slope(x, 3 * x**2) == pytest.approx(2.0)
    assert convergence_order([1.0, 0.25, 0.0625]) == pytest.approx([2.0, 2.0])
