"""Topological pressure with node brackets, and the Bowen root ``P(T, -t log DT) = 0``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergentPotential, NoSignChange
from .potentials import BowenSequence, Potential, bowen_constants, geometric, summability_bound
from .systems import DEFAULT_TRUNCATION, SystemSpec, TruncationPolicy, compose
from .transfer import operator_plan


@dataclass(frozen=True)
class PressureEstimate:
    """``(1/n) log L^n 1`` at the anchor, bracketed by its min and max over the nodes."""

    potential: str
    depth: int
    lower: float
    point: float
    upper: float
    anchor: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack


@dataclass(frozen=True)
class AcceleratedPressure(PressureEstimate):
    """Pressure from the whole sequence ``a_n = log L^n 1(a)``.

    ``point`` is the increment ``a_n - a_{n-1}``, which removes the constant
    offset that slows ``a_n / n`` down. ``fekete_upper`` and ``fekete_lower``
    are ``min_m (a_m + K_m + C)/m`` and ``max_m (a_m - K_m - C')/m`` with the
    subadditivity defects C, C' measured on the computed sequence.
    """

    raw_point: float = math.nan
    fekete_upper: float = math.nan
    fekete_lower: float = math.nan
    defect_upper: float = 0.0
    defect_lower: float = 0.0
    sequence: np.ndarray = field(default=None, repr=False)

    @property
    def consistent(self) -> bool:
        tol = 1e-12 * max(1.0, abs(self.point))
        return (self.lower - tol <= self.point <= self.upper + tol
                and self.fekete_lower - tol <= self.point <= self.fekete_upper + tol)


def _log_iterates(sys, pot, n, grid_size, trunc, anchor):
    """``log L^k 1`` at the anchor for k = 1..n, plus log min/max over the nodes at k = n."""
    plan = operator_plan(sys, pot, grid_size, trunc)
    nodes = np.linspace(sys.lo, sys.hi, grid_size)
    v = np.ones(grid_size)
    scale = 0.0
    seq = np.empty(n)
    for k in range(n):
        v = plan.apply_values(v)
        s = float(v.max())
        if not s > 0 or not math.isfinite(s):
            raise DivergentPotential(f"L^{k + 1} 1 is not finite and positive for {pot.label()}")
        v = v / s
        scale += math.log(s)
        seq[k] = scale + math.log(float(np.interp(anchor, nodes, v)))
    return seq, scale + math.log(float(v.min())), scale


def _anchor(sys, anchor):
    a = sys.midpoint if anchor is None else float(anchor)
    if not sys.contains(a):
        raise ValueError(f"anchor {a} outside the hull")
    return a


def pressure_at(sys: SystemSpec, pot: Potential, n: int, grid_size: int = 257,
                trunc: TruncationPolicy | None = None, anchor: float | None = None) -> PressureEstimate:
    if n < 1:
        raise ValueError("depth must be >= 1")
    trunc = trunc or DEFAULT_TRUNCATION
    a = _anchor(sys, anchor)
    seq, log_min, log_max = _log_iterates(sys, pot, n, grid_size, trunc, a)
    return PressureEstimate(pot.label(), n, log_min / n, seq[-1] / n, log_max / n, a)


def pressure_accelerated(sys: SystemSpec, pot: Potential, n_max: int, grid_size: int = 257,
                         trunc: TruncationPolicy | None = None, bowen: BowenSequence | None = None,
                         anchor: float | None = None, probe=None) -> AcceleratedPressure:
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    trunc = trunc or DEFAULT_TRUNCATION
    a = _anchor(sys, anchor)
    if bowen is None:
        bowen = bowen_constants(sys, pot, min(n_max, _affordable_depth(sys, trunc)), probe, trunc)
    if len(bowen) < 1:
        raise ValueError("missing K_n data")
    seq, log_min, log_max = _log_iterates(sys, pot, n_max, grid_size, trunc, a)
    # K_m beyond the measured range: extend by the certified bound, else by the last value
    K = np.array([bowen[min(m, len(bowen))] for m in range(1, n_max + 1)])
    if len(bowen) < n_max and bowen.bound is not None:
        K[len(bowen):] = np.maximum(K[len(bowen):], bowen.bound)

    a_n = np.concatenate([[0.0], seq])  # a_0 = log L^0 1 = 0
    defect_up = 0.0
    defect_lo = 0.0
    for m in range(1, n_max):
        for n in range(m, n_max - m + 1):
            s = a_n[n + m] - a_n[n] - a_n[m]
            defect_up = max(defect_up, s - K[m - 1])
            defect_lo = max(defect_lo, -s - K[m - 1])
    m = np.arange(1, n_max + 1)
    fek_up = float(np.min((seq + K + defect_up) / m))
    fek_lo = float(np.max((seq - K - defect_lo) / m))
    return AcceleratedPressure(
        potential=pot.label(),
        depth=n_max,
        lower=log_min / n_max,
        point=float(seq[-1] - seq[-2]),
        upper=log_max / n_max,
        anchor=a,
        raw_point=float(seq[-1] / n_max),
        fekete_upper=fek_up,
        fekete_lower=fek_lo,
        defect_upper=defect_up,
        defect_lower=defect_lo,
        sequence=seq,
    )


def _affordable_depth(sys, trunc, budget=1 << 22, probe_size=33):
    B = trunc.measure_branches if sys.is_countable else sys.branch_count
    if B <= 1:
        return 64
    return max(1, int(math.log(budget / probe_size) / math.log(B)))


@dataclass(frozen=True)
class IdentityCheck:
    difference: float
    composed: PressureEstimate
    base: PressureEstimate

    @property
    def tolerance(self) -> float:
        return self.composed.width + self.base.depth * 0 + self.composed.depth * self.base.width


def iterate_identity_terms(sys: SystemSpec, t: float, m: int, n: int, grid_size: int = 257,
                           trunc: TruncationPolicy | None = None, anchor: float | None = None) -> IdentityCheck:
    """``P(T^m, t)`` at depth n against ``m P(T, t)`` at depth ``m n`` (same number of inverse steps)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    sys_m = compose(sys, m)
    pot = geometric(t)
    composed = pressure_at(sys_m, pot, n, grid_size, trunc, anchor)
    base = pressure_at(sys, pot, m * n, grid_size, trunc, anchor)
    return IdentityCheck(abs(composed.point - m * base.point), composed, base)


def iterate_identity_check(sys: SystemSpec, t: float, m: int, n: int, grid_size: int = 257,
                           trunc: TruncationPolicy | None = None, anchor: float | None = None) -> float:
    return iterate_identity_terms(sys, t, m, n, grid_size, trunc, anchor).difference


@dataclass(frozen=True)
class PressureCurve:
    system: str
    depth: int
    samples: list  # (t, PressureEstimate), t strictly increasing
    divergent: tuple = ()

    @property
    def ts(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    @property
    def points(self) -> np.ndarray:
        return np.array([e.point for _, e in self.samples])

    @property
    def widths(self) -> np.ndarray:
        return np.array([e.width for _, e in self.samples])


def pressure_curve(sys: SystemSpec, ts, depth: int = 12, grid_size: int = 257,
                   trunc: TruncationPolicy | None = None, anchor: float | None = None) -> PressureCurve:
    ts = [float(t) for t in ts]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t samples must be strictly increasing")
    samples, divergent = [], []
    for t in ts:
        try:
            samples.append((t, pressure_at(sys, geometric(t), depth, grid_size, trunc, anchor)))
        except DivergentPotential:
            divergent.append(t)
    if not samples:
        raise DivergentPotential(f"pressure diverges at every sampled t on {sys.label()}")
    return PressureCurve(sys.label(), depth, samples, tuple(divergent))


def summability_threshold(sys: SystemSpec, t_lo: float = 0.0, t_hi: float = 4.0, tol: float = 1e-6) -> float:
    """Estimate of ``tau(T) = inf{t : P(T, t) < inf}``; 0 when every probed t is summable."""

    def finite(t):
        try:
            summability_bound(sys, geometric(t))
            return True
        except DivergentPotential:
            return False

    if finite(t_lo):
        return t_lo
    if not finite(t_hi):
        return math.inf
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        if finite(mid):
            t_hi = mid
        else:
            t_lo = mid
    return t_hi


@dataclass(frozen=True)
class BowenResult:
    s_hat: float
    t_lo: float
    t_hi: float
    estimate: PressureEstimate
    iterations: int
    depth: int
    p_lo: float = math.nan
    p_hi: float = math.nan

    @property
    def certified(self) -> bool:
        """Sign change kept across ``[t_lo, t_hi]`` and the bracket at s_hat within reach of 0.

        Reach is the bracket width plus the pressure drop over the final
        t-interval, since P is monotone there.
        """
        e = self.estimate
        if not (self.p_lo >= 0.0 >= self.p_hi):
            return False
        slack = e.width + (self.p_lo - self.p_hi)
        return e.lower - slack <= 0.0 <= e.upper + slack

    def report_row(self) -> tuple:
        return (self.s_hat, self.t_lo, self.t_hi, self.estimate.lower, self.estimate.upper)


def bowen_solve(sys: SystemSpec, t_lo: float = 0.0, t_hi: float = 1.0, tol_t: float = 1e-8,
                depth: int | None = 12, grid_size: int = 257, trunc: TruncationPolicy | None = None,
                anchor: float | None = None, max_expand: int = 16, max_depth: int = 4096) -> BowenResult:
    """Bisection for the zero of ``t -> P(T, -t log DT)``.

    With ``depth=None`` the depth doubles from 12 until the bracket width at the
    root is below ``tol_t * log C`` or ``max_depth`` is reached.
    """
    C = sys.expansion_lower
    if not C > 1:
        raise ConfigError(f"{sys.label()}: expansion constant {C:g} <= 1, pressure is not strictly decreasing")
    if not tol_t > 0 or t_hi <= t_lo:
        raise ValueError("need tol_t > 0 and t_lo < t_hi")
    trunc = trunc or DEFAULT_TRUNCATION

    def run(d, lo, hi):
        def P(t):
            return pressure_at(sys, geometric(t), d, grid_size, trunc, anchor)

        try:
            p_lo = P(lo).point
        except DivergentPotential:
            raise NoSignChange(f"pressure diverges at t_lo = {lo}", tau=summability_threshold(sys, lo, hi))
        if not p_lo > 0:
            raise NoSignChange(f"P({lo}) = {p_lo:.6g} is not positive", tau=summability_threshold(sys, lo, hi))
        expand = 0
        while P(hi).point >= 0:
            lo, hi = hi, (2.0 * hi if hi > 0 else 1.0)
            p_lo = P(lo).point
            expand += 1
            if expand > max_expand:
                raise NoSignChange(f"pressure still nonnegative at t = {hi}")
        p_lo, p_hi = p_lo, P(hi).point
        it = 0
        while hi - lo >= tol_t:
            mid = 0.5 * (lo + hi)
            p_mid = P(mid).point
            if p_mid > 0:
                lo, p_lo = mid, p_mid
            else:
                hi, p_hi = mid, p_mid
            it += 1
        s = 0.5 * (lo + hi)
        return BowenResult(s, lo, hi, P(s), it, d, p_lo, p_hi)

    if depth is not None:
        return run(int(depth), t_lo, t_hi)
    d = 12
    res = run(d, t_lo, t_hi)
    while res.estimate.width >= tol_t * math.log(C) and 2 * d <= max_depth:
        d *= 2
        res = run(d, t_lo, t_hi)
    return res
