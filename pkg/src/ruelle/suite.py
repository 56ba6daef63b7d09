"""Invariant suite run by the ``verify`` command."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import measures, potentials, pressure, systems, transfer
from .errors import BudgetExceeded, NumericError
from .potentials import Geometric


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    threshold: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name} value={self.value:.17g} threshold={self.threshold:.17g}"


def _le(name, value, threshold):
    return Check(name, bool(value <= threshold), float(value), float(threshold))


def _bowen_depth(sys, trunc, n, probe_size=33, budget=1 << 22):
    B = trunc.measure_branches if sys.is_countable else sys.branch_count
    k = 1
    while k < n and B ** (k + 1) * probe_size <= budget:
        k += 1
    return k


def run_suite(cfg) -> list[Check]:
    """Evaluate every invariant for the configured system and potential, in a fixed order."""
    sys = cfg.system()
    pot = cfg.potential()
    trunc = cfg.truncation()
    a = cfg.resolved_anchor()
    n = cfg.depth
    grid = cfg.grid_size
    probe = systems.probe_grid(sys)
    out = []

    # systems and potentials
    letters = sys.letters if not sys.is_countable else np.arange(1, 9)
    words = [tuple(int(c) for c in w) for w in np.array(np.meshgrid(letters, letters, letters)).T.reshape(-1, 3)]
    words.sort()
    cocycle = 0.0
    chain = 0.0
    for w in words:
        u, v = w[:1], w[1:]
        lhs = potentials.birkhoff_sum(sys, pot, w, probe)
        rhs = potentials.birkhoff_sum(sys, pot, v, probe) + potentials.birkhoff_sum(
            sys, pot, u, systems.apply_word(sys, v, probe))
        cocycle = max(cocycle, float(np.abs(lhs - rhs).max()))
        d = systems.derivative(sys, w, probe)
        dd = np.ones_like(probe)
        y = probe
        for i in reversed(w):
            dd = dd * np.abs(sys.branch_derivative(i, y))
            y = sys.branch(i, y)
        chain = max(chain, float(np.abs(d * dd - 1.0).max()))
    out.append(_le("cocycle_additivity", cocycle, 1e-10))
    out.append(_le("chain_rule", chain, 1e-10))

    iv = systems.image_intervals(sys, words)
    iv = iv[np.argsort(iv[:, 0], kind="stable")]
    overlap = float(np.max(iv[:-1, 1] - iv[1:, 0]))
    out.append(_le("disjoint_images", max(overlap, 0.0), 1e-15))

    kdepth = _bowen_depth(sys, trunc, n)
    K = potentials.bowen_constants(sys, pot, kdepth, probe, trunc)

    def K_at(k):
        """Measured K_k, or the certified bound (else the last measured value) past the measured range."""
        if k <= len(K):
            return K[k]
        return max(K[len(K)], K.bound or 0.0)

    out.append(_le("bowen_monotone", float(max(0.0, -np.diff(K.values).min(initial=0.0))), 0.0))
    if K.bound is not None:
        out.append(_le("bowen_bound", float(K.values.max() - K.bound), 1e-12))

    bound = potentials.summability_bound(sys, pot, probe)
    if sys.is_countable:
        M = 1024
        actual = np.exp(pot.log_weights(sys, np.arange(1, M + 1)[:, None], probe[None, :])).sum(axis=0)
        actual = actual + np.asarray(pot.tail_atoms(sys, M, probe)[1]).sum(axis=1)
    else:
        actual = np.exp(pot.log_weights(sys, sys.letters[:, None], probe[None, :])).sum(axis=0)
    out.append(_le("summability_dominance", float(actual.max() / bound - 1.0), 1e-12))

    # transfer
    eig = transfer.solve_eigen(sys, pot, grid, cfg.tol, cfg.max_iter, trunc, depth=n, anchor=a)
    out.append(_le("eigen_residual", eig.residual_h / eig.h.values.max(), 10 * cfg.tol))
    out.append(_le("collatz_wielandt_bracket", max(eig.cw_lower - eig.lam, eig.lam - eig.cw_upper, 0.0), 0.0))
    out.append(_le("eigenfunction_positive", float(-eig.h.values.min()), 0.0))
    psi = transfer.normalize_potential(sys, pot, eig, trunc, check=False)
    out.append(_le("normalization", transfer.normalization_error(sys, psi, grid, trunc), 1e-6))
    fundamental = max(
        transfer.fundamental_equation_check(sys, pot, eig, f, k, trunc)
        for f in (lambda x: np.ones_like(x), lambda x: x, lambda x: x * x)
        for k in range(1, 5)
    )
    out.append(_le("fundamental_equation", fundamental, 1e-5))

    # pressure
    est = pressure.pressure_at(sys, pot, n, grid, trunc, a)
    out.append(_le("bracket_order", max(est.lower - est.point, est.point - est.upper, 0.0), 0.0))
    est2 = pressure.pressure_at(sys, pot, 2 * n, grid, trunc, a)
    widen = 2.0 * K_at(n) / n
    nest = max(est.lower - widen - est2.lower, est2.upper - est.upper - widen, 0.0)
    out.append(_le("bracket_nesting", nest, 1e-12))
    acc = pressure.pressure_accelerated(sys, pot, max(40, n), grid, trunc, K, a, probe)
    out.append(_le("eigen_pressure_consistency", abs(acc.point - eig.log_lambda), 1e-6))
    out.append(_le("accelerated_bracket", 0.0 if acc.consistent else 1.0, 0.0))
    other = sys.lo + 0.25 * sys.diameter
    est_b = pressure.pressure_at(sys, pot, n, grid, trunc, other)
    out.append(_le("anchor_independence", abs(est.point - est_b.point), K_at(n) / n + 1e-12))

    if isinstance(pot, Geometric) and not sys.is_countable:
        gap = pressure.iterate_identity_check(sys, pot.t, 2, n, grid, trunc, a)
        out.append(_le("iterate_identity", gap, 1e-6))
    if isinstance(pot, Geometric) and sys.expansion_lower > 1:
        curve = pressure.pressure_curve(sys, np.linspace(cfg.t_min, cfg.t_max, cfg.t_steps), n, grid, trunc, a)
        P, ts, w = curve.points, curve.ts, curve.widths
        slack = 2.0 * (w[1:] + w[:-1])
        out.append(_le("curve_monotone", float(np.max(np.diff(P) - slack)), 0.0))
        conv = P[1:-1] - 0.5 * (P[:-2] + P[2:]) - 2.0 * np.maximum(w[1:-1], np.maximum(w[:-2], w[2:]))
        out.append(_le("curve_convex", float(conv.max()), 1e-12))
        slope = np.diff(P) / np.diff(ts) + math.log(sys.expansion_lower)
        out.append(_le("curve_slope", float(slope.max()), 1e-6))

    # measures
    mu = eig.mu
    out.append(_le("measure_normalized", abs(float(mu.weights.sum()) - 1.0), 1e-12))
    if not sys.is_countable:
        out.append(_le("measure_positive", float(-mu.weights.min()), -1e-300))
    P_hat = est.point
    mu_p = measures.build_eigenmeasure(sys, pot, n, P_hat, trunc, grid, a)
    top = min(mu_p.explicit_depth, len(K))
    gibbs = measures.gibbs_verify(sys, pot, mu_p, K, P_hat, max_level=top)
    worst = max(max(lv.lower - lv.min_ratio, lv.max_ratio - lv.upper) for lv in gibbs.levels)
    out.append(_le("gibbs_sandwich", max(worst, 0.0), 1e-9))
    jac = measures.jacobian_verify(sys, pot, mu, eig.lam)
    out.append(_le("jacobian", jac, 1e-3))
    m = measures.invariant_measure(mu, eig.h)
    out.append(_le("invariance", measures.invariance_verify(sys, m), 1e-3))
    top_atom = measures.max_atom(mu)
    out.append(_le("no_atom_proxy", top_atom, 0.5))
    if mu.inner_depth == 0 and n >= 2:
        lo_r, hi_r = measures.refinement_ratios(sys, pot, mu, trunc, grid)
        spread = max(abs(math.log(lo_r)), abs(math.log(hi_r)))
        out.append(_le("refinement_consistency", spread, K_at(n) + K_at(n - 1) + 1e-12))
    return out
