import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ruelle import kernels
from ruelle.potentials import geometric
from ruelle.systems import gauss
from ruelle.transfer import operator_plan

compiled = pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")


def random_plan(seed, n, b, lo=0.0, hi=1.0):
    rng = np.random.default_rng(seed)
    points = rng.uniform(lo - 0.01, hi + 0.01, size=(n, b))  # a few off-hull points exercise the clamp
    weights = rng.exponential(size=(n, b))
    values = rng.normal(size=n)
    return values, points, weights, (hi - lo) / (n - 1)


@compiled
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 40), b=st.integers(1, 37))
def test_backends_bitwise_equal(seed, n, b):
    values, points, weights, step = random_plan(seed, n, b)
    outs = []
    for name in ("cython", "python"):
        with kernels.using(name):
            outs.append(kernels.transfer(values, 0.0, 1.0, step, points, weights))
            outs.append(kernels.transfer_adjoint(values, 0.0, 1.0, step, points, weights))
    assert np.array_equal(outs[0], outs[2])
    assert np.array_equal(outs[1], outs[3])


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 30), b=st.integers(1, 9))
def test_adjoint_is_transpose(seed, n, b):
    values, points, weights, step = random_plan(seed, n, b)
    r = np.random.default_rng(seed + 1).exponential(size=n)
    lhs = float(np.dot(r, kernels.transfer(values, 0.0, 1.0, step, points, weights)))
    rhs = float(np.dot(kernels.transfer_adjoint(r, 0.0, 1.0, step, points, weights), values))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(a=st.floats(-5, 5), c=st.floats(-5, 5), seed=st.integers(0, 1000))
def test_linear_functions_interpolated_exactly(a, c, seed):
    n = 17
    rng = np.random.default_rng(seed)
    points = rng.uniform(0, 1, size=(n, 5))
    weights = rng.uniform(0.1, 1, size=(n, 5))
    nodes = np.linspace(0, 1, n)
    out = kernels.transfer(a + c * nodes, 0.0, 1.0, 1 / (n - 1), points, weights)
    assert np.allclose(out, (weights * (a + c * points)).sum(axis=1), atol=1e-12)


def test_workers_do_not_change_bits():
    plan = operator_plan(gauss(), geometric(1.0), 513)
    v = np.cos(np.linspace(0, 3, 513))
    assert plan.points.size >= kernels.MIN_PARALLEL_WORK
    with kernels.using(n_workers=1):
        one = plan.apply_values(v)
    with kernels.using(n_workers=5):
        five = plan.apply_values(v)
    assert np.array_equal(one, five)


def test_using_restores_state():
    before = (kernels.backend(), kernels.workers())
    with kernels.using("python", 3):
        assert kernels.backend() == "python" and kernels.workers() == 3
    assert (kernels.backend(), kernels.workers()) == before


def test_bad_settings():
    with pytest.raises(ValueError):
        kernels.set_workers(0)
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_env_selects_fallback():
    code = "from ruelle import kernels; print(kernels.backend(), kernels.workers())"
    env = dict(os.environ, RUELLE_PURE_PYTHON="1", RUELLE_WORKERS="2")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    assert out.stdout.split() == ["python", "2"]
