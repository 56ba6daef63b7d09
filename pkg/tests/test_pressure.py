import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ruelle.errors import ConfigError, DivergentPotential, NoSignChange
from ruelle.potentials import bowen_constants, builtin_potential, constant, geometric
from ruelle.pressure import (bowen_solve, iterate_identity_check, pressure_accelerated, pressure_at,
                             pressure_curve, summability_threshold)
from ruelle.systems import doubling, gauss, golden_cantor, linear_cantor, perturbed_doubling

S_CANTOR = math.log(2) / math.log(3)


@pytest.mark.parametrize("n", [1, 7, 30])
def test_doubling_zero_potential(n):
    e = pressure_at(doubling(), constant([0, 0]), n)
    assert e.lower == e.point == e.upper == pytest.approx(math.log(2), abs=1e-15)


@pytest.mark.parametrize("n", [1, 5, 17])
def test_middle_thirds_closed_form(n):
    e = pressure_at(linear_cantor(2, 3), geometric(1), n)
    assert e.point == pytest.approx(math.log(2 / 3), abs=1e-14)
    assert e.upper - e.lower < 1e-14


def test_perturbed_self_consistency():
    pd, pot = perturbed_doubling(0.05), geometric(1)
    e12, e24 = pressure_at(pd, pot, 12), pressure_at(pd, pot, 24)
    assert abs(e12.point - e24.point) < 1e-3
    assert e24.contains(e24.point)
    # the true value P = 0 sits in both brackets; the depth-12 point itself sits at the edge of its own
    assert e12.contains(0.0) and e24.contains(0.0)
    assert e24.lower >= e12.lower and e24.upper <= e12.upper


def test_log_space_guard():
    # L^n 1 = 2^n e^{700 n}: overflows without per-step renormalization
    e = pressure_at(doubling(), constant([700.0, 700.0]), 50)
    assert e.point == pytest.approx(700 + math.log(2), rel=1e-15)


def test_accelerated_matches_affine():
    for sys in (doubling(), linear_cantor(2, 3), golden_cantor()):
        a = pressure_accelerated(sys, geometric(0.7), 10)
        b = pressure_at(sys, geometric(0.7), 10)
        assert a.point == pytest.approx(b.point, abs=1e-13)
        assert a.consistent


def test_accelerated_branch_constants():
    a = pressure_accelerated(doubling(), constant([0.0, math.log(2)]), 4)
    assert a.point == pytest.approx(math.log(3), abs=1e-9)


def test_accelerated_perturbed_in_bracket():
    a = pressure_accelerated(perturbed_doubling(0.05), geometric(1), 20)
    assert a.lower <= a.point <= a.upper
    assert a.fekete_lower <= a.point <= a.fekete_upper
    assert abs(a.point) < 1e-8  # P(-log T') = 0 for this smooth expanding circle map


def test_accelerated_needs_two_steps():
    with pytest.raises(ValueError):
        pressure_accelerated(doubling(), geometric(1), 1)


@pytest.mark.parametrize("sys,t,m,n,tol", [
    (doubling(), 0.0, 2, 6, 1e-15),
    (linear_cantor(2, 3), 1.0, 3, 4, 1e-14),
    (perturbed_doubling(0.05), 0.8, 2, 10, 1e-6),
])
def test_iterate_identity(sys, t, m, n, tol):
    assert iterate_identity_check(sys, t, m, n) <= tol


@pytest.mark.parametrize("sys,expected", [
    (linear_cantor(2, 3), S_CANTOR),
    (golden_cantor(), -math.log2((math.sqrt(5) - 1) / 2)),
    (doubling(), 1.0),
])
def test_bowen_examples(sys, expected):
    res = bowen_solve(sys)
    assert res.s_hat == pytest.approx(expected, abs=1e-7)
    assert res.t_hi - res.t_lo < 1e-8 and res.certified


def test_bowen_expands_upper_end():
    res = bowen_solve(linear_cantor(3, 4), t_lo=0.0, t_hi=0.1)
    assert res.s_hat == pytest.approx(math.log(3) / math.log(4), abs=1e-7)


def test_bowen_auto_depth_stops_when_bracket_is_tight():
    res = bowen_solve(golden_cantor(), depth=None)
    assert res.depth == 12 and res.certified


def test_bowen_refuses_weak_expansion():
    with pytest.raises(ConfigError):
        bowen_solve(gauss())


def test_bowen_no_sign_change():
    with pytest.raises(NoSignChange):
        bowen_solve(linear_cantor(2, 3), t_lo=0.9, t_hi=1.5)


def test_summability_threshold_gauss():
    assert summability_threshold(gauss()) == pytest.approx(0.5, abs=2e-6)
    assert summability_threshold(doubling()) == 0.0


def test_curve_skips_divergent_samples():
    c = pressure_curve(gauss(), [0.3, 0.6, 1.0, 1.4])
    assert c.divergent == (0.3,)
    assert list(c.ts) == [0.6, 1.0, 1.4]
    assert np.all(np.diff(c.points) < 0)
    with pytest.raises(ValueError):
        pressure_curve(doubling(), [0.2, 0.1])
    with pytest.raises(DivergentPotential):
        pressure_curve(gauss(), [0.1, 0.2])


@given(t1=st.floats(0, 2), dt=st.floats(0.01, 1))
def test_monotone_and_slope(t1, dt):
    sys = perturbed_doubling(0.05)
    a, b = pressure_at(sys, geometric(t1), 12), pressure_at(sys, geometric(t1 + dt), 12)
    widths = a.width + b.width
    assert b.point - a.point <= -math.log(sys.expansion_lower) * dt + 2 * widths


@given(t=st.floats(0, 2), h=st.floats(0.01, 0.5))
def test_convexity(t, h):
    sys = perturbed_doubling(0.05)
    e = [pressure_at(sys, geometric(t + k * h), 12) for k in range(3)]
    widths = max(x.width for x in e)
    assert e[1].point <= 0.5 * (e[0].point + e[2].point) + 2 * widths


@pytest.mark.parametrize("sys,pot", [(perturbed_doubling(0.05), geometric(1)),
                                     (doubling(), builtin_potential("cosine")),
                                     (gauss(), geometric(1))])
def test_bracket_nesting(sys, pot):
    n = 10
    K = bowen_constants(sys, pot, 2 if sys.is_countable else n)
    Kn = max(K.values.max(), K.bound or 0.0)
    a, b = pressure_at(sys, pot, n), pressure_at(sys, pot, 2 * n)
    assert b.lower >= a.lower - 2 * Kn / n and b.upper <= a.upper + 2 * Kn / n


@pytest.mark.parametrize("sys,pot", [(perturbed_doubling(0.05), geometric(1)),
                                     (doubling(), builtin_potential("linear"))])
def test_anchor_independence(sys, pot):
    n = 12
    K = bowen_constants(sys, pot, n)
    a, b = pressure_at(sys, pot, n, anchor=0.1), pressure_at(sys, pot, n, anchor=0.8)
    assert abs(a.point - b.point) <= K[n] / n


def test_anchor_outside_hull():
    with pytest.raises(ValueError):
        pressure_at(doubling(), geometric(1), 3, anchor=1.2)
