"""The Perron-Frobenius-Ruelle operator on piecewise-linear grid functions."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import (
    NoConvergence,
    NonpositiveEigenfunction,
    NormalizationError,
    TruncationError,
)
from .potentials import Normalized, Potential
from .systems import DEFAULT_TRUNCATION, SystemSpec, TruncationPolicy, tail_cutoff


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Node values on a uniform grid over the hull, read through linear interpolation."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a grid function needs at least two nodes")
        if values.shape != nodes.shape:
            raise ValueError("one value per node")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("nodes must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __call__(self, x):
        return np.interp(x, self.nodes, self.values)

    @property
    def size(self) -> int:
        return self.nodes.size

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.nodes, values)

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    @classmethod
    def on(cls, sys: SystemSpec, size: int, fn: Callable | float = 1.0) -> "GridFunction":
        nodes = grid_nodes(sys, size)
        if callable(fn):
            values = np.asarray(fn(nodes), dtype=float) * np.ones_like(nodes)
        else:
            values = np.full_like(nodes, float(fn))
        return cls(nodes, values)


def grid_nodes(sys: SystemSpec, size: int) -> np.ndarray:
    if size < 2:
        raise ValueError("grid_size must be >= 2")
    return np.linspace(sys.lo, sys.hi, int(size))


@dataclass(frozen=True, eq=False)
class OperatorPlan:
    """Preimage points and weights ``exp(phi)`` of every node, one column per branch atom."""

    points: np.ndarray
    weights: np.ndarray
    lo: float
    hi: float
    step: float
    explicit_branches: int
    lumped: bool
    truncation_error: float = 0.0
    tail_mass: float = 0.0

    def apply_values(self, values) -> np.ndarray:
        return kernels.transfer(values, self.lo, self.hi, self.step, self.points, self.weights)

    def adjoint_values(self, r) -> np.ndarray:
        return kernels.transfer_adjoint(r, self.lo, self.hi, self.step, self.points, self.weights)


def _check_uniform(nodes):
    d = np.diff(nodes)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
        raise ValueError("transfer kernels need uniformly spaced nodes")


def lumping_cutoff(sys: SystemSpec, step: float, cap: int) -> int:
    """Smallest M whose branch tail fits inside the first grid cell."""
    M = 1
    while True:
        a, b = sys.tail_support(M)
        if a >= sys.lo and b <= sys.lo + step:
            break
        M *= 2
        if M > cap:
            raise TruncationError(f"{sys.name}: tail does not fit a grid cell within {cap} branches")
    lo, hi = M // 2, M
    while hi - lo > 1:
        mid = (lo + hi) // 2
        a, b = sys.tail_support(mid)
        if b <= sys.lo + step:
            hi = mid
        else:
            lo = mid
    return hi


@functools.lru_cache(maxsize=64)
def _plan(sys: SystemSpec, pot: Potential, size: int, trunc: TruncationPolicy) -> OperatorPlan:
    nodes = grid_nodes(sys, size)
    step = (sys.hi - sys.lo) / (size - 1)
    truncation_error = 0.0
    tail_mass = 0.0
    lumped = False
    if sys.is_countable:
        tail_pts = tail_w = None
        if trunc.lump_tail:
            try:
                M = lumping_cutoff(sys, step, trunc.max_branches)
                tail_pts, tail_w = pot.tail_atoms(sys, M, nodes)
                lumped = True
            except TruncationError:
                lumped = False
        if not lumped:
            M = tail_cutoff(sys, trunc, lambda m: pot.tail_bound(sys, m))
            truncation_error = pot.tail_bound(sys, M)
        letters = np.arange(1, M + 1)
    else:
        M = sys.branch_count
        letters = sys.letters
    points = sys.branch(letters[None, :], nodes[:, None])
    weights = np.exp(pot.log_weights(sys, letters[None, :], nodes[:, None]))
    if lumped:
        points = np.concatenate([points, tail_pts], axis=1)
        weights = np.concatenate([weights, tail_w], axis=1)
        tail_mass = float(tail_w.sum(axis=1).max())
        # the quadrature is exact on the first cell; what is left is rounding in the zeta sums
        truncation_error = 8.0 * np.finfo(float).eps * tail_mass
    points = np.ascontiguousarray(np.broadcast_to(points, weights.shape), dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    return OperatorPlan(points, weights, sys.lo, sys.hi, step, M, lumped, truncation_error, tail_mass)


def operator_plan(sys: SystemSpec, pot: Potential, nodes_or_size, trunc: TruncationPolicy | None = None):
    trunc = trunc or DEFAULT_TRUNCATION
    if np.ndim(nodes_or_size) == 0:
        size = int(nodes_or_size)
    else:
        nodes = np.asarray(nodes_or_size, dtype=float)
        _check_uniform(nodes)
        if not (math.isclose(nodes[0], sys.lo) and math.isclose(nodes[-1], sys.hi)):
            raise ValueError("grid nodes must span the hull")
        size = nodes.size
    return _plan(sys, pot, size, trunc)


def apply(sys: SystemSpec, pot: Potential, f: GridFunction, trunc: TruncationPolicy | None = None) -> GridFunction:
    """``(L_phi f)(x) = sum_i f(g_i x) exp(phi(g_i x))`` at every node of ``f``."""
    plan = operator_plan(sys, pot, f.nodes, trunc)
    return f.with_values(plan.apply_values(f.values))


def iterate(sys: SystemSpec, pot: Potential, f: GridFunction, n: int,
            trunc: TruncationPolicy | None = None) -> GridFunction:
    if n < 0:
        raise ValueError("n must be >= 0")
    plan = operator_plan(sys, pot, f.nodes, trunc)
    v = f.values
    for _ in range(n):
        v = plan.apply_values(v)
    return f.with_values(v)


@dataclass(frozen=True, eq=False)
class EigenData:
    lam: float
    h: GridFunction
    mu: object  # CylinderMeasure, or None when not requested
    residual_h: float
    cw_lower: float
    cw_upper: float
    iterations: int
    tol: float
    cw_widths: np.ndarray = field(repr=False, default=None)
    lambda_history: np.ndarray = field(repr=False, default=None)
    truncation_error: float = 0.0

    @property
    def log_lambda(self) -> float:
        return math.log(self.lam)


def solve_eigen(sys: SystemSpec, pot: Potential, grid_size: int = 257, tol: float = 1e-9,
                max_iter: int = 10_000, trunc: TruncationPolicy | None = None, depth: int = 12,
                anchor: float | None = None, with_measure: bool = True) -> EigenData:
    """Leading eigenvalue, eigenfunction and eigenmeasure of ``L_phi`` by power iteration.

    Iterates are kept at sup-norm 1. On exit ``h`` is rescaled so that the
    depth-``depth`` cylinder eigenmeasure gives ``mu(h) = 1``.
    """
    trunc = trunc or DEFAULT_TRUNCATION
    plan = operator_plan(sys, pot, grid_size, trunc)
    nodes = grid_nodes(sys, grid_size)
    f = np.ones(grid_size)
    lam_prev = math.inf
    widths, lams = [], []
    residual = math.inf
    for k in range(1, max_iter + 1):
        g = plan.apply_values(f)
        if not np.all(g > 0):
            raise NonpositiveEigenfunction(
                f"iterate {k} has a nonpositive node value (min {g.min():.3g}); "
                "the system may not be backward dense for this potential"
            )
        lam = float(g.max())
        ratio = g / f
        cw_lo, cw_hi = float(ratio.min()), float(ratio.max())
        residual = float(np.abs(g - lam * f).max()) + plan.truncation_error
        widths.append(cw_hi - cw_lo)
        lams.append(lam)
        if abs(lam - lam_prev) < tol and residual < tol:
            break
        lam_prev = lam
        f = g / lam
    else:
        raise NoConvergence(
            f"power iteration did not converge in {max_iter} steps (residual {residual:.3g})",
            residual=residual,
            history=np.array(widths),
        )
    h = GridFunction(nodes, f)
    mu = None
    scale = 1.0
    if with_measure:
        from .measures import build_eigenmeasure, integrate

        mu = build_eigenmeasure(sys, pot, depth, math.log(lam), trunc, grid_size=grid_size, anchor=anchor)
        scale = 1.0 / integrate(mu, h)
        h = h.with_values(h.values * scale)
    return EigenData(
        lam=lam,
        h=h,
        mu=mu,
        residual_h=residual * scale,
        cw_lower=cw_lo,
        cw_upper=cw_hi,
        iterations=k,
        tol=tol,
        cw_widths=np.array(widths),
        lambda_history=np.array(lams),
        truncation_error=plan.truncation_error,
    )


def normalize_potential(sys: SystemSpec, pot: Potential, eig: EigenData,
                        trunc: TruncationPolicy | None = None, check: bool = True) -> Normalized:
    """The normalized potential ``psi`` with ``L_psi 1 = 1``; checked on the grid."""
    if not np.all(eig.h.values > 0):
        raise NonpositiveEigenfunction("eigenfunction is not positive")
    psi = Normalized(pot, eig.lam, eig.h)
    if check:
        err = normalization_error(sys, psi, eig.h.size, trunc)
        if err > 10.0 * eig.tol:
            raise NormalizationError(f"sup |L_psi 1 - 1| = {err:.3g} exceeds {10 * eig.tol:.3g}")
    return psi


def normalization_error(sys: SystemSpec, psi: Potential, grid_size: int,
                        trunc: TruncationPolicy | None = None) -> float:
    one = GridFunction.on(sys, grid_size, 1.0)
    return float(np.abs(apply(sys, psi, one, trunc).values - 1.0).max())


def fundamental_equation_check(sys: SystemSpec, pot: Potential, eig: EigenData, f, n: int,
                               trunc: TruncationPolicy | None = None) -> float:
    """``sup |L_psi^n f - lam^-n h^-1 L_phi^n (h f)|`` over the nodes."""
    if n < 1:
        raise ValueError("n must be >= 1")
    h = eig.h
    fv = f.values if isinstance(f, GridFunction) else np.asarray(f(h.nodes), dtype=float) * np.ones(h.size)
    psi = normalize_potential(sys, pot, eig, trunc, check=False)
    lhs = iterate(sys, psi, h.with_values(fv), n, trunc).values
    rhs = iterate(sys, pot, h.with_values(h.values * fv), n, trunc).values / (eig.lam ** n * h.values)
    return float(np.abs(lhs - rhs).max())
