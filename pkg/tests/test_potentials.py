import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from ruelle.errors import BudgetExceeded, ConfigError, DivergentPotential
from ruelle.potentials import (admissibility_modulus, birkhoff_sum, bowen_constants, builtin_potential, constant,
                               geometric, summability_bound, two_point_rule)
from ruelle.systems import (apply_word, derivative, doubling, gauss, golden_cantor, linear_cantor,
                            perturbed_doubling, probe_grid)

FINITE = [doubling(), linear_cantor(2, 3), golden_cantor(), perturbed_doubling(0.05)]


def test_birkhoff_zero_potential():
    assert birkhoff_sum(doubling(), constant([0, 0]), (1, 2, 2, 1), 0.4) == 0.0


def test_birkhoff_middle_thirds():
    assert birkhoff_sum(linear_cantor(2, 3), geometric(1), (1, 2, 1, 1), 0.2) == pytest.approx(-4 * math.log(3))


def test_birkhoff_gauss_single_letter():
    # phi(g_2(0)) = log|g_2'(0)| = 2 log(1/2)
    assert birkhoff_sum(gauss(), geometric(1), (2,), 0.0) == pytest.approx(2 * math.log(0.5), rel=1e-15)


def test_birkhoff_branch_constants():
    pot = constant([0.25, -1.0])
    assert birkhoff_sum(golden_cantor(), pot, (1, 2, 2), 0.9) == pytest.approx(0.25 - 2.0)


word_strategy = st.lists(st.integers(1, 2), min_size=1, max_size=5).map(tuple)


@pytest.mark.parametrize("sys", FINITE + [gauss()], ids=lambda s: s.label())
@given(w=word_strategy, x=st.floats(0, 1), t=st.floats(0.6, 3.0))
def test_geometric_is_log_derivative(sys, w, x, t):
    lhs = float(birkhoff_sum(sys, geometric(t), w, x))
    rhs = -t * math.log(float(derivative(sys, w, x)))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("pot", [geometric(0.7), builtin_potential("cosine"), builtin_potential("linear")],
                         ids=lambda p: p.label())
@given(u=word_strategy, v=word_strategy, x=st.floats(0, 1))
def test_cocycle_additivity(pot, u, v, x):
    sys = perturbed_doubling(0.05)
    whole = birkhoff_sum(sys, pot, u + v, x)
    split = birkhoff_sum(sys, pot, v, x) + birkhoff_sum(sys, pot, u, apply_word(sys, v, x))
    assert float(whole) == pytest.approx(float(split), abs=1e-10)


def test_summability_examples():
    assert summability_bound(doubling(), geometric(1)) == pytest.approx(1.0, rel=1e-15)
    assert summability_bound(linear_cantor(2, 3), geometric(0)) == 2.0
    zeta2 = float(mpmath.zeta(2))
    assert summability_bound(gauss(), geometric(1)) == pytest.approx(zeta2, rel=1e-12)


@pytest.mark.parametrize("t", [0.5, 0.4, 0.0])
def test_gauss_divergent(t):
    with pytest.raises(DivergentPotential):
        summability_bound(gauss(), geometric(t))


@given(t=st.floats(0.51, 3.0), x=st.floats(0, 1), M=st.integers(1, 500))
def test_gauss_tail_atoms_match_zeta(t, x, M):
    pts, w = geometric(t).tail_atoms(gauss(), M, np.array([x]))
    expected = float(mpmath.zeta(2 * t, M + 1 + x))
    assert w.sum() == pytest.approx(expected, rel=1e-10)
    # tail branch images lie in (0, 1/(M+1)]
    assert np.all(pts > 0) and np.all(pts <= 1.0 / (M + 1) * (1 + 1e-12))


@given(st.lists(st.tuples(st.floats(0.0, 1.0), st.floats(0.01, 1.0)), min_size=3, max_size=8,
                unique_by=lambda p: round(p[0], 3)))
def test_two_point_rule_is_exact_on_cubics(atoms):
    xs = np.array([a for a, _ in atoms])
    ws = np.array([b for _, b in atoms])
    if np.ptp(xs) < 1e-3:
        return
    m = [float(np.sum(ws * xs ** k)) for k in range(4)]
    pts, wts = two_point_rule(*m)
    for k in range(4):
        assert float(np.sum(wts * pts ** k)) == pytest.approx(m[k], rel=1e-8, abs=1e-12)
    assert np.all(wts > 0)
    assert xs.min() - 1e-9 <= pts.min() and pts.max() <= xs.max() + 1e-9


@given(st.floats(0, 1), st.floats(0, 1))
def test_summability_dominance_on_probe(a, b):
    probe = np.array(sorted({a, b}))
    for sys, pot in ((perturbed_doubling(0.05), geometric(1.3)), (doubling(), builtin_potential("cosine"))):
        bound = summability_bound(sys, pot, probe)
        actual = np.exp(pot.log_weights(sys, sys.letters[:, None], probe[None, :])).sum(axis=0)
        assert actual.max() <= bound * (1 + 1e-15)


def test_bowen_affine_and_constants_vanish():
    for sys in (doubling(), linear_cantor(2, 3), golden_cantor()):
        K = bowen_constants(sys, geometric(0.8), 6)
        assert np.all(K.values == 0.0) and K.closed_form
    K = bowen_constants(doubling(), constant([0.3, -0.2]), 5)
    assert np.all(K.values == 0.0)
    assert K[0] == 0.0


def _forward_branch(eps, i, x):
    return brentq(lambda y: 2 * y + eps * math.sin(2 * math.pi * y) - (i - 1) - x,
                  (i - 1) / 2, i / 2, xtol=1e-15, rtol=1e-15)


def test_bowen_perturbed_against_forward_map():
    # independent brute force: S_n phi(y) = -log |(T^n)'(y)| along forward orbits
    eps, n_max = 0.05, 4
    probe = np.linspace(0, 1, 17)
    K = bowen_constants(perturbed_doubling(eps), geometric(1), n_max, probe)
    for n in range(1, n_max + 1):
        worst = 0.0
        for w in itertools.product((1, 2), repeat=n):
            vals = []
            for x in probe:
                y = x
                for i in reversed(w):
                    y = _forward_branch(eps, i, y)
                s, z = 0.0, y
                for _ in range(n):
                    s -= math.log(2 + 2 * math.pi * eps * math.cos(2 * math.pi * z))
                    z = (2 * z + eps * math.sin(2 * math.pi * z)) % 1.0
                vals.append(s)
            worst = max(worst, max(vals) - min(vals))
        assert K[n] == pytest.approx(worst, abs=1e-9)


def test_bowen_perturbed_sequence():
    K = bowen_constants(perturbed_doubling(0.05), geometric(1), 8, np.linspace(0, 1, 17))
    assert np.all(np.diff(K.values) >= 0)
    assert K.sublinear_flag
    C = 2 - 2 * math.pi * 0.05
    assert K.bound == pytest.approx(4 * math.pi ** 2 * 0.05 / C / (C - 1), rel=1e-12)
    assert K[8] <= K.bound
    np.testing.assert_allclose(K.values[:3], [0.31682, 0.43870, 0.46404], atol=5e-5)


def test_bowen_gauss_monotone_with_distortion_bound():
    K = bowen_constants(gauss(), geometric(1), 2)
    assert K[1] <= K[2] <= K.bound == pytest.approx(math.log(4))


def test_bowen_budget():
    with pytest.raises(BudgetExceeded):
        bowen_constants(perturbed_doubling(0.05), geometric(1), 30)


def test_builtin_potentials():
    with pytest.raises(ConfigError):
        builtin_potential("quadratic")
    cos = builtin_potential("cosine")
    assert cos.holder(doubling()) == pytest.approx((math.pi / 2, 1.0))
    y = doubling().branch(2, 0.3)
    assert float(cos.log_weights(doubling(), 2, 0.3)) == pytest.approx(0.25 * math.cos(2 * math.pi * y))


def test_constant_potential_shape_checks():
    with pytest.raises(ConfigError):
        constant([1.0, 2.0, 3.0]).log_weights(doubling(), 1, 0.5)
    with pytest.raises(ConfigError):
        constant([1.0]).log_weights(gauss(), 1, 0.5)


def test_admissibility_modulus_small_on_fine_probe():
    coarse = admissibility_modulus(perturbed_doubling(0.05), geometric(1), probe_grid(doubling(), 9))
    fine = admissibility_modulus(perturbed_doubling(0.05), geometric(1), probe_grid(doubling(), 129))
    assert 0 < fine < coarse
