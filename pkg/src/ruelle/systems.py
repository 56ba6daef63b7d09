"""Expanding interval maps given by their full inverse branches.

Branch letters are 1-based. A word ``(i1, ..., in)`` denotes the composed
inverse branch ``g_i1 o g_i2 o ... o g_in``; its image of ``x`` is the point
``y`` with ``T^n(y) = x`` whose orbit visits the branch domains ``i1, i2, ...``
in that order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import zeta

from .errors import BudgetExceeded, ConfigError, TruncationError

Word = tuple[int, ...]

CATALOG = ("doubling", "linear_cantor", "golden_cantor", "perturbed_doubling", "gauss")


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """An expanding map on the hull ``[lo, hi]`` described by its inverse branches.

    ``branch_count`` is ``None`` for a countable family. ``log_dlip`` is the
    Lipschitz constant of ``log D T`` on the branch domains (``None`` when it
    is not uniformly Lipschitz); ``log_distortion_bound`` is a certified bound
    on ``log`` of the distortion constant of every composed branch.
    """

    name: str
    lo: float
    hi: float
    expansion_lower: float
    branch_count: int | None
    map_fn: Callable = field(repr=False)
    deriv_fn: Callable = field(repr=False)
    params: tuple = ()
    affine: bool = False
    log_dlip: float | None = None
    log_distortion_bound: float | None = None
    tail_support_fn: Callable | None = field(default=None, repr=False)
    tail_moment_fn: Callable | None = field(default=None, repr=False)
    # |g_n'| decays like n^(-tail_decay); geometric weights are summable iff t * tail_decay > 1
    tail_decay: float | None = None

    @property
    def is_countable(self) -> bool:
        return self.branch_count is None

    @property
    def diameter(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def letters(self) -> np.ndarray:
        if self.is_countable:
            raise TypeError(f"{self.name} has countably many branches")
        return np.arange(1, self.branch_count + 1)

    def label(self) -> str:
        if not self.params:
            return self.name
        return f"{self.name}({', '.join(f'{p:g}' for p in self.params)})"

    def _check_letters(self, letters):
        letters = np.asarray(letters)
        if letters.size and (letters.min() < 1 or (
                self.branch_count is not None and letters.max() > self.branch_count)):
            raise ValueError(f"branch letter out of range for {self.name}")
        return letters

    def branch(self, letters, x):
        """``g_i(x)``, broadcasting letters against points."""
        return self.map_fn(self._check_letters(letters), np.asarray(x, dtype=float))

    def branch_derivative(self, letters, x):
        """Signed derivative ``g_i'(x)``."""
        return self.deriv_fn(self._check_letters(letters), np.asarray(x, dtype=float))

    def inverse_branch(self, i: int) -> "InverseBranch":
        ends = self.branch(i, np.array([self.lo, self.hi]))
        return InverseBranch(
            index=i,
            map=lambda x, _i=i: self.branch(_i, x),
            map_derivative=lambda x, _i=i: self.branch_derivative(_i, x),
            image=(float(ends.min()), float(ends.max())),
        )

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        tol = 1e-14 * max(1.0, abs(self.lo), abs(self.hi))
        return bool(np.all((x >= self.lo - tol) & (x <= self.hi + tol)))

    def tail_support(self, M: int) -> tuple[float, float]:
        """An interval containing every ``g_i(hull)`` with ``i > M``."""
        if self.tail_support_fn is None:
            raise TruncationError(f"{self.name} has no tail support law")
        return self.tail_support_fn(M)

    def tail_moment(self, s: float, M: int, x, k: int = 0):
        """``sum_{i > M} |g_i'(x)|^(s/2) * g_i(x)^k`` for systems that know it in closed form."""
        if self.tail_moment_fn is None:
            raise TruncationError(f"{self.name} has no closed-form tail moments")
        return self.tail_moment_fn(s, M, np.asarray(x, dtype=float), k)


@dataclass(frozen=True)
class InverseBranch:
    index: int
    map: Callable = field(repr=False)
    map_derivative: Callable = field(repr=False)
    image: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class TruncationPolicy:
    """How countable branch families are cut.

    ``epsilon`` bounds the discarded tail weight when words are enumerated
    explicitly. With ``lump_tail`` the branches beyond the cutoff are not
    discarded but replaced by a two-atom quadrature matching the first four
    moments of the tail; on a grid whose first cell holds the whole tail this
    is exact for piecewise-linear functions. ``measure_branches`` is the number
    of explicit letters per position used for cylinder measures.
    """

    epsilon: float = 1e-10
    max_branches: int = 100_000
    lump_tail: bool = True
    measure_branches: int = 64
    tail_law: Callable[[int], float] | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("truncation epsilon must be positive")


DEFAULT_TRUNCATION = TruncationPolicy()


# ---------------------------------------------------------------------------
# catalog


def _affine_system(name, params, slopes, offsets, lo=0.0, hi=1.0):
    slopes = np.asarray(slopes, dtype=float)
    offsets = np.asarray(offsets, dtype=float)

    def g(i, x):
        return slopes[i - 1] * x + offsets[i - 1]

    def dg(i, x):
        return slopes[i - 1] * np.ones_like(x)

    return SystemSpec(
        name=name,
        lo=lo,
        hi=hi,
        expansion_lower=float(1.0 / np.max(np.abs(slopes))),
        branch_count=len(slopes),
        map_fn=g,
        deriv_fn=dg,
        params=tuple(params),
        affine=True,
        log_dlip=0.0,
        log_distortion_bound=0.0,
    )


def doubling() -> SystemSpec:
    return _affine_system("doubling", (), [0.5, 0.5], [0.0, 0.5])


def linear_cantor(N: int = 2, r: float = 3.0) -> SystemSpec:
    if int(N) != N or N < 1:
        raise ConfigError("linear_cantor needs an integer N >= 1")
    N = int(N)
    if not r > 1:
        raise ConfigError("linear_cantor needs r > 1")
    if N / r > 1 + 1e-15:
        raise ConfigError(f"linear_cantor: N/r = {N / r:g} > 1, branch images overlap")
    shifts = [0.0] if N == 1 else [(k * (r - 1) / (N - 1)) / r for k in range(N)]
    return _affine_system("linear_cantor", (N, r), [1.0 / r] * N, shifts)


def golden_cantor() -> SystemSpec:
    return _affine_system("golden_cantor", (), [0.5, 0.25], [0.0, 0.75])


def perturbed_doubling(eps: float = 0.05) -> SystemSpec:
    """``T(x) = 2x + eps sin(2 pi x) mod 1`` through its two inverse branches."""
    eps = float(eps)
    C = 2.0 - 2.0 * math.pi * abs(eps)
    if not C > 1:
        raise ConfigError(f"perturbed_doubling: 2 - 2 pi |eps| = {C:g} <= 1, map not expanding")
    two_pi = 2.0 * math.pi

    def solve(i, x):
        c = x + (i - 1.0)
        y = c / 2.0
        for _ in range(60):
            step = (2.0 * y + eps * np.sin(two_pi * y) - c) / (2.0 + two_pi * eps * np.cos(two_pi * y))
            y = y - step
            if np.all(np.abs(step) <= 1e-15):
                break
        # one more Newton step lands on the rounding floor
        return y - (2.0 * y + eps * np.sin(two_pi * y) - c) / (2.0 + two_pi * eps * np.cos(two_pi * y))

    def g(i, x):
        i, x = np.broadcast_arrays(i, x)
        return solve(i.astype(float), x.astype(float))

    def dg(i, x):
        y = g(i, x)
        return 1.0 / (2.0 + two_pi * eps * np.cos(two_pi * y))

    lip = 2.0 * two_pi * math.pi * abs(eps) / C  # sup |(log T')'| = 4 pi^2 |eps| / (2 - 2 pi |eps|)
    return SystemSpec(
        name="perturbed_doubling",
        lo=0.0,
        hi=1.0,
        expansion_lower=C,
        branch_count=2,
        map_fn=g,
        deriv_fn=dg,
        params=(eps,),
        log_dlip=lip,
        log_distortion_bound=lip / (C - 1.0),
    )


def gauss() -> SystemSpec:
    """The Gauss map ``x -> 1/x mod 1`` with branches ``g_n(x) = 1/(n + x)``, n >= 1."""

    def g(n, x):
        return 1.0 / (n + x)

    def dg(n, x):
        return -1.0 / (n + x) ** 2

    def support(M):
        return 0.0, 1.0 / (M + 1.0)

    def moment(s, M, x, k):
        # sum_{n > M} (n + x)^(-s) * (n + x)^(-k)
        return zeta(s + k, M + 1.0 + x)

    return SystemSpec(
        name="gauss",
        lo=0.0,
        hi=1.0,
        expansion_lower=1.0,
        branch_count=None,
        map_fn=g,
        deriv_fn=dg,
        params=(),
        log_dlip=None,
        # the composed branch (p + p' x)/(q + q' x) has |g'| ratio ((q + q')/q)^2 <= 4
        log_distortion_bound=math.log(4.0),
        tail_support_fn=support,
        tail_moment_fn=moment,
        tail_decay=2.0,
    )


def builtin_system(name: str, params: Sequence[float] = (), **kwargs) -> SystemSpec:
    """Build a catalog system. ``params`` may be positional or given by keyword."""
    params = list(params)
    if name == "doubling":
        _no_params(name, params, kwargs)
        return doubling()
    if name == "golden_cantor":
        _no_params(name, params, kwargs)
        return golden_cantor()
    if name == "gauss":
        _no_params(name, params, kwargs)
        return gauss()
    if name == "linear_cantor":
        N = kwargs.pop("N", params[0] if len(params) > 0 else 2)
        r = kwargs.pop("r", params[1] if len(params) > 1 else 3.0)
        _no_params(name, params[2:], kwargs)
        return linear_cantor(N, r)
    if name == "perturbed_doubling":
        eps = kwargs.pop("eps", params[0] if params else 0.05)
        _no_params(name, params[1:], kwargs)
        return perturbed_doubling(eps)
    raise ConfigError(f"unknown system {name!r}; expected one of {', '.join(CATALOG)}")


def _no_params(name, params, kwargs):
    if params or kwargs:
        raise ConfigError(f"unexpected parameters for {name}: {list(params) or sorted(kwargs)}")


def compose(sys: SystemSpec, m: int, max_branches: int = 4096) -> SystemSpec:
    """The system of ``T^m``: one branch per depth-m word, in lexicographic order."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if sys.is_countable:
        raise BudgetExceeded("composition is only supported for finite branch families")
    B = sys.branch_count
    if B ** m > max_branches:
        raise BudgetExceeded(f"{B}^{m} composed branches exceed the cap {max_branches}")
    table = np.array(list(itertools.product(range(1, B + 1), repeat=m)), dtype=int)

    def g(j, x):
        j, x = np.broadcast_arrays(np.asarray(j), np.asarray(x, dtype=float))
        letters = table[j - 1]
        y = x.astype(float)
        for k in range(m - 1, -1, -1):
            y = sys.branch(letters[..., k], y)
        return y

    def dg(j, x):
        j, x = np.broadcast_arrays(np.asarray(j), np.asarray(x, dtype=float))
        letters = table[j - 1]
        y = x.astype(float)
        d = np.ones_like(y)
        for k in range(m - 1, -1, -1):
            d = d * sys.branch_derivative(letters[..., k], y)
            y = sys.branch(letters[..., k], y)
        return d

    return SystemSpec(
        name=f"{sys.name}^{m}",
        lo=sys.lo,
        hi=sys.hi,
        expansion_lower=sys.expansion_lower ** m,
        branch_count=B ** m,
        map_fn=g,
        deriv_fn=dg,
        params=sys.params,
        affine=sys.affine,
        log_dlip=None,
        log_distortion_bound=sys.log_distortion_bound,
    )


# ---------------------------------------------------------------------------
# words and preimages


def probe_grid(sys: SystemSpec, n: int = 33) -> np.ndarray:
    return np.linspace(sys.lo, sys.hi, n)


def apply_word(sys: SystemSpec, word: Sequence[int], x):
    y = np.asarray(x, dtype=float)
    for i in reversed(tuple(word)):
        y = sys.branch(i, y)
    return y


def tail_cutoff(sys: SystemSpec, trunc: TruncationPolicy, tail_law=None) -> int:
    """Smallest M whose tail bound ``tail_law(M)`` is below ``trunc.epsilon``."""
    law = trunc.tail_law or tail_law
    if law is None:
        raise TruncationError(f"{sys.name}: countable system needs a tail bound to truncate")
    if law(1) < trunc.epsilon:
        return 1
    hi = 2
    while law(hi) >= trunc.epsilon:
        hi *= 2
        if hi > 4 * trunc.max_branches:
            break
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if law(mid) < trunc.epsilon:
            hi = mid
        else:
            lo = mid
    if hi > trunc.max_branches:
        raise TruncationError(
            f"{sys.name}: tail below {trunc.epsilon:g} needs {hi} branches (cap {trunc.max_branches})"
        )
    return hi


def preimages(sys: SystemSpec, x: float, n: int, trunc: TruncationPolicy | None = None,
              pot=None) -> list[tuple[Word, float]]:
    """All depth-n preimages of ``x`` as ``(word, point)`` pairs in lexicographic word order.

    Countable systems keep the letters up to the cutoff set by ``trunc``; the
    tail law comes from ``trunc.tail_law`` or from ``pot``.
    """
    if not sys.contains(x):
        raise ValueError(f"x = {x} outside the hull [{sys.lo}, {sys.hi}]")
    if n < 0:
        raise ValueError("depth must be >= 0")
    if sys.is_countable:
        trunc = trunc or DEFAULT_TRUNCATION
        law = None if pot is None else (lambda M: pot.tail_bound(sys, M))
        M = tail_cutoff(sys, trunc, law)
        letters = range(1, M + 1)
    else:
        letters = range(1, sys.branch_count + 1)
    out = []
    for word in itertools.product(letters, repeat=n):
        out.append((word, float(apply_word(sys, word, x))))
    return out


def derivative(sys: SystemSpec, word: Sequence[int], x):
    """``D T^n`` at ``g_w(x)``, by the chain rule along the word."""
    y = np.asarray(x, dtype=float)
    d = np.ones_like(y)
    for i in reversed(tuple(word)):
        d = d * np.abs(sys.branch_derivative(i, y))
        y = sys.branch(i, y)
    return 1.0 / d


def distortion_constant(sys: SystemSpec, word: Sequence[int], probe) -> float:
    probe = np.asarray(probe, dtype=float)
    if probe.size == 0:
        raise ValueError("probe must be nonempty")
    d = derivative(sys, word, probe)
    return float(d.max() / d.min())


def image_intervals(sys: SystemSpec, words) -> np.ndarray:
    """``[min, max]`` of ``g_w(hull)`` for each word (branches are monotone)."""
    ends = np.array([apply_word(sys, w, np.array([sys.lo, sys.hi])) for w in words])
    return np.sort(ends, axis=1)
