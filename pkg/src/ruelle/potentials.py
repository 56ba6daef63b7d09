"""Potentials on branch domains, Birkhoff sums and regularity constants."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded, ConfigError, DivergentPotential, TruncationError
from .systems import SystemSpec, TruncationPolicy, probe_grid

BUILTIN_POTENTIALS = ("cosine", "linear")


class Potential:
    """A test function phi, evaluated through the branches: ``phi(g_i(x))``."""

    kind = "abstract"

    def log_weights(self, sys: SystemSpec, letters, x):
        raise NotImplementedError

    def evaluate(self, sys: SystemSpec, i, x):
        return self.log_weights(sys, i, x)

    def holder(self, sys: SystemSpec):
        """``(L, sigma)`` with ``|phi(y) - phi(y')| <= L |y - y'|^sigma``, or None."""
        return None

    def tail_bound(self, sys: SystemSpec, M: int) -> float:
        raise TruncationError(f"{self.label()} has no tail law on {sys.name}")

    def tail_atoms(self, sys: SystemSpec, M: int, x):
        raise TruncationError(f"{self.label()} cannot lump the branch tail of {sys.name}")

    def label(self) -> str:
        return self.kind


@dataclass(frozen=True, eq=False)
class Geometric(Potential):
    """``phi_t = -t log D T``; through branch i this is ``t log |g_i'(x)|``."""

    t: float
    kind = "geometric"

    def log_weights(self, sys, letters, x):
        d = np.abs(sys.branch_derivative(letters, x))
        if self.t == 0:
            return np.zeros_like(d)
        return self.t * np.log(d)

    def holder(self, sys):
        if sys.log_dlip is None or sys.log_dlip == 0 or self.t == 0:
            return None
        return abs(self.t) * sys.log_dlip, 1.0

    def _tail_exponent(self, sys):
        if sys.tail_decay is None:
            raise TruncationError(f"{sys.name} has no tail law")
        s = self.t * sys.tail_decay
        if s <= 1.0:
            raise DivergentPotential(
                f"{self.label()} is not summable on {sys.name}: branch weights decay like n^-{s:g}"
            )
        return s

    def tail_bound(self, sys, M):
        s = self._tail_exponent(sys)
        ends = np.array([sys.lo, sys.hi])
        return float(np.max(sys.tail_moment(s, M, ends, 0)))

    def tail_atoms(self, sys, M, x):
        s = self._tail_exponent(sys)
        x = np.asarray(x, dtype=float)
        m = [sys.tail_moment(s, M, x, k) for k in range(4)]
        return two_point_rule(*m)

    def label(self):
        return f"geometric(t={self.t:.17g})"


@dataclass(frozen=True, eq=False)
class BranchConstant(Potential):
    values: tuple
    kind = "constant"

    def log_weights(self, sys, letters, x):
        if sys.is_countable:
            raise ConfigError("per-branch constants need a finite branch family")
        if len(self.values) != sys.branch_count:
            raise ConfigError(f"{len(self.values)} constants for {sys.branch_count} branches")
        letters = np.asarray(letters)
        vals = np.asarray(self.values, dtype=float)[letters - 1]
        return np.broadcast_to(vals, np.broadcast_shapes(letters.shape, np.shape(x))).astype(float)

    def label(self):
        return "constant(" + ",".join(f"{v:.17g}" for v in self.values) + ")"


_BUILTINS = {
    # name: (function of the point y, Holder constant L, exponent sigma)
    "cosine": (lambda y: 0.25 * np.cos(2.0 * np.pi * y), 0.5 * math.pi, 1.0),
    "linear": (lambda y: y, 1.0, 1.0),
}


@dataclass(frozen=True, eq=False)
class Builtin(Potential):
    name: str
    kind = "builtin"

    def __post_init__(self):
        if self.name not in _BUILTINS:
            raise ConfigError(f"unknown builtin potential {self.name!r}; expected {BUILTIN_POTENTIALS}")

    def log_weights(self, sys, letters, x):
        if sys.is_countable:
            raise TruncationError(f"builtin potential {self.name} has no tail law for {sys.name}")
        return _BUILTINS[self.name][0](sys.branch(letters, x))

    def holder(self, sys):
        _, L, sigma = _BUILTINS[self.name]
        return L, sigma

    def label(self):
        return f"builtin({self.name})"


@dataclass(frozen=True, eq=False)
class Normalized(Potential):
    """``psi = phi - log lam + log h - log h o T`` for an eigenpair ``(lam, h)`` of ``L_phi``."""

    base: Potential
    lam: float
    h: object = field(repr=False)  # GridFunction; kept loose to avoid an import cycle
    kind = "normalized"

    def log_weights(self, sys, letters, x):
        x = np.asarray(x, dtype=float)
        y = sys.branch(letters, x)
        return self.base.log_weights(sys, letters, x) - math.log(self.lam) + np.log(self.h(y)) - np.log(self.h(x))

    def tail_bound(self, sys, M):
        v = self.h.values
        return self.base.tail_bound(sys, M) * float(v.max() / v.min()) / self.lam

    def tail_atoms(self, sys, M, x):
        x = np.asarray(x, dtype=float)
        pts, w = self.base.tail_atoms(sys, M, x)
        return pts, w * self.h(pts) / (self.lam * self.h(x))[..., None]

    def label(self):
        return f"normalized({self.base.label()})"


def geometric(t: float) -> Geometric:
    return Geometric(float(t))


def constant(values: Sequence[float]) -> BranchConstant:
    return BranchConstant(tuple(float(v) for v in values))


def builtin_potential(name: str) -> Builtin:
    return Builtin(name)


def two_point_rule(m0, m1, m2, m3):
    """Two atoms reproducing the moments ``m0..m3`` of a positive measure on the line.

    Returns ``(points, weights)`` with a trailing axis of length 2.
    """
    m0 = np.asarray(m0, dtype=float)
    c = m1 / m0
    var = np.maximum(m2 / m0 - c * c, 0.0)
    k3 = m3 / m0 - 3.0 * c * (m2 / m0) + 2.0 * c ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(var > 0, k3 / np.where(var > 0, var, 1.0), 0.0)
    root = np.sqrt(b * b + 4.0 * var)
    zp = 0.5 * (b + root)
    zm = 0.5 * (b - root)
    span = zp - zm
    safe = np.where(span > 0, span, 1.0)
    wp = np.where(span > 0, m0 * (-zm) / safe, 0.5 * m0)
    wm = np.where(span > 0, m0 * zp / safe, 0.5 * m0)
    pts = np.stack([c + zm, c + zp], axis=-1)
    wts = np.stack([wm, wp], axis=-1)
    return pts, wts


# ---------------------------------------------------------------------------


def birkhoff_sum(sys: SystemSpec, pot: Potential, word: Sequence[int], x):
    """``S_n phi(g_w(x))``, accumulated from the innermost letter outward."""
    z = np.asarray(x, dtype=float)
    total = np.zeros_like(z)
    for i in reversed(tuple(word)):
        total = total + pot.log_weights(sys, i, z)
        z = sys.branch(i, z)
    return total


def summability_bound(sys: SystemSpec, pot: Potential, probe=None, explicit: int = 1024) -> float:
    """Upper estimate of ``sup_x sum_{T y = x} exp(phi(y))``.

    Countable families sum ``explicit`` branches on the probe and add the tail bound.
    Raises DivergentPotential when the tail does not go to zero.
    """
    probe = probe_grid(sys) if probe is None else np.asarray(probe, dtype=float)
    if probe.size == 0:
        raise ValueError("probe must be nonempty")
    if sys.is_countable:
        tail = pot.tail_bound(sys, explicit)
        letters = np.arange(1, explicit + 1)
    else:
        tail = 0.0
        letters = sys.letters
    sums = np.exp(pot.log_weights(sys, letters[:, None], probe[None, :])).sum(axis=0)
    return float(sums.max() + tail)


def admissibility_modulus(sys: SystemSpec, pot: Potential, probe=None, explicit: int = 1024) -> float:
    """Largest ``sum_i |exp phi(g_i x) - exp phi(g_i x')|`` over neighbouring probe points."""
    probe = probe_grid(sys) if probe is None else np.asarray(probe, dtype=float)
    if sys.is_countable:
        letters = np.arange(1, explicit + 1)
        tail = 2.0 * pot.tail_bound(sys, explicit)
    else:
        letters, tail = sys.letters, 0.0
    e = np.exp(pot.log_weights(sys, letters[:, None], probe[None, :]))
    return float(np.abs(np.diff(e, axis=1)).sum(axis=0).max() + tail)


@dataclass(frozen=True)
class BowenSequence:
    """``K_1, K_2, ...`` bounding the oscillation of ``S_n phi`` on depth-n cylinders."""

    values: np.ndarray
    sublinear_flag: bool
    bound: float | None = None
    closed_form: bool = False
    words_evaluated: int = 0

    def __getitem__(self, n: int) -> float:
        """``K_n`` for n >= 1; ``K_0 = 0``."""
        if n == 0:
            return 0.0
        return float(self.values[n - 1])

    def __len__(self):
        return len(self.values)


def bowen_constants(sys: SystemSpec, pot: Potential, n_max: int, probe=None,
                    trunc: TruncationPolicy | None = None, budget: int = 1 << 22) -> BowenSequence:
    """Measured ``K_n = max_w max_{x,y} |S_n phi(g_w x) - S_n phi(g_w y)|`` for n <= n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    probe = probe_grid(sys) if probe is None else np.asarray(probe, dtype=float)
    bound, sublinear = _certified_bound(sys, pot)
    if isinstance(pot, BranchConstant) or (isinstance(pot, Geometric) and sys.affine):
        return BowenSequence(np.zeros(n_max), True, 0.0, closed_form=True)

    if sys.is_countable:
        letters = np.arange(1, (trunc or TruncationPolicy()).measure_branches + 1)
    else:
        letters = sys.letters
    B = len(letters)
    if B ** n_max * probe.size > budget:
        raise BudgetExceeded(
            f"{B}^{n_max} words x {probe.size} probe points exceeds the cap {budget}"
        )
    pts = probe[None, :]
    sums = np.zeros_like(pts)
    values = np.empty(n_max)
    evaluated = 0
    for n in range(n_max):
        lw = pot.log_weights(sys, letters[:, None, None], pts[None, :, :])
        sums = (sums[None, :, :] + lw).reshape(-1, probe.size)
        pts = sys.branch(letters[:, None, None], pts[None, :, :]).reshape(-1, probe.size)
        values[n] = float((sums.max(axis=1) - sums.min(axis=1)).max())
        evaluated += sums.shape[0]
    if sys.is_countable:
        # a far tail letter adds almost no oscillation, so the full-family sup is nondecreasing;
        # the truncated alphabet can only undershoot it
        values = np.maximum.accumulate(values)
    return BowenSequence(values, sublinear, bound, closed_form=False, words_evaluated=evaluated)


def _certified_bound(sys, pot):
    """A uniform bound on every K_n when one is available from catalog metadata."""
    hold = pot.holder(sys)
    if hold is not None and sys.expansion_lower > 1:
        L, sigma = hold
        C = sys.expansion_lower
        return L * sys.diameter ** sigma / (C ** sigma - 1.0), True
    if isinstance(pot, Geometric) and sys.log_distortion_bound is not None:
        return abs(pot.t) * sys.log_distortion_bound, True
    return None, False
