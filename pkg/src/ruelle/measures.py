"""Cylinder approximations of the eigenmeasure and of the invariant measure, with their checks.

A depth-n measure is a list of atoms. Atom k carries a word (its first
``explicit_depth`` letters), the representative ``g_w(a)``, the shifted
point ``T(g_w(a))`` and a weight. For finite systems with few enough words
every word of length n is enumerated, one atom per word. Otherwise the
first letters are enumerated and the remaining ``inner_depth`` letters are
summed through the adjoint of the grid operator, so atoms sit on
``g_u(node)`` instead of ``g_w(a)``. Countable branch tails past
``measure_branches`` enter as the two quadrature atoms of the lumped tail,
both carrying the letter ``tail_letter``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, TruncationError
from .potentials import BowenSequence, Potential
from .systems import DEFAULT_TRUNCATION, SystemSpec, TruncationPolicy
from .transfer import GridFunction, grid_nodes, operator_plan

DEFAULT_TEST_FUNCTIONS = {
    "1": lambda x: np.ones_like(x),
    "x": lambda x: x,
    "x^2": lambda x: x * x,
    "sin(2pi x)": lambda x: np.sin(2.0 * np.pi * x),
}


@dataclass(frozen=True, eq=False)
class CylinderMeasure:
    depth: int
    words: np.ndarray = field(repr=False)
    representatives: np.ndarray = field(repr=False)
    shifted: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    anchor: float
    pressure_used: float
    first_log_weight: np.ndarray = field(repr=False, default=None)
    inner_depth: int = 0
    tail_letter: int | None = None
    truncated_mass: float = 0.0
    lumped_mass: float = 0.0
    log_normalizer: float = 0.0

    def __post_init__(self):
        w = self.weights
        if w.ndim != 1 or w.size != self.words.shape[0]:
            raise ValueError("one weight per atom")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")

    @property
    def explicit_depth(self) -> int:
        return self.words.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    def with_weights(self, weights) -> "CylinderMeasure":
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0:
            raise NumericError("weights sum to zero")
        tail = self._tail_rows()
        return CylinderMeasure(
            self.depth, self.words, self.representatives, self.shifted, w / total, self.anchor,
            self.pressure_used, self.first_log_weight, self.inner_depth, self.tail_letter,
            self.truncated_mass, float((w[tail] / total).sum()), self.log_normalizer,
        )

    def _tail_rows(self):
        if self.tail_letter is None:
            return np.zeros(self.size, dtype=bool)
        return np.any(self.words == self.tail_letter, axis=1)

    def marginal(self, m: int):
        """Masses of the depth-m cylinders, as ``(words (U, m), masses (U,))`` in lexicographic order."""
        if not 0 <= m <= self.explicit_depth:
            raise ValueError(f"marginal depth {m} outside 0..{self.explicit_depth}")
        uniq, inv = _group(self.words[:, :m])
        return uniq, np.bincount(inv, weights=self.weights, minlength=len(uniq))

    def merged(self):
        """One entry per enumerated word: ``(words, mean representative, mass)``.

        Atoms that share a word are merged at their mass-weighted mean point.
        """
        words, inv = _group(self.words)
        mass = np.bincount(inv, weights=self.weights, minlength=len(words))
        moment = np.bincount(inv, weights=self.weights * self.representatives, minlength=len(words))
        safe = np.where(mass > 0, mass, 1.0)
        return words, np.where(mass > 0, moment / safe, np.nan), mass

    def mass(self, prefix) -> float:
        prefix = np.asarray(prefix, dtype=self.words.dtype)
        if prefix.size > self.explicit_depth:
            raise ValueError("prefix longer than the enumerated depth")
        sel = np.all(self.words[:, :prefix.size] == prefix, axis=1)
        return float(self.weights[sel].sum())

    def word_label(self, word) -> str:
        return "-".join(f">{self.tail_letter - 1}" if self.tail_letter is not None and c == self.tail_letter
                        else str(int(c)) for c in word)


def _group(keys: np.ndarray):
    """Unique rows in lexicographic order and the inverse index."""
    n, m = keys.shape
    if m == 0:
        return keys[:1], np.zeros(n, dtype=np.intp)
    base = int(keys.max()) + 1
    if m * math.log2(base) < 62:
        code = np.zeros(n, dtype=np.int64)
        for j in range(m):
            code = code * base + keys[:, j]
        uniq_code, first, inv = np.unique(code, return_index=True, return_inverse=True)
        return keys[first], inv.ravel()
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    return uniq, inv.ravel()


def _hat_weights(nodes, a):
    step = nodes[1] - nodes[0]
    k = min(max(int((a - nodes[0]) // step), 0), nodes.size - 2)
    s = (a - nodes[k]) / step
    r = np.zeros(nodes.size)
    r[k] += 1.0 - s
    r[k + 1] += s
    return r


def _alphabet(sys, pot, trunc):
    """Explicit letters, plus the cutoff for the lumped tail (None if there is none)."""
    if not sys.is_countable:
        return sys.letters, None
    M = trunc.measure_branches
    try:
        pot.tail_atoms(sys, M, np.array([sys.lo]))
        return np.arange(1, M + 1), M
    except TruncationError:
        if trunc.lump_tail and not trunc.tail_law:
            raise
    raise TruncationError(f"{sys.name}: no lumped tail for {pot.label()}")


def build_eigenmeasure(sys: SystemSpec, pot: Potential, n: int, P_hat: float,
                       trunc: TruncationPolicy | None = None, grid_size: int = 257,
                       anchor: float | None = None, budget: int = 1 << 21) -> CylinderMeasure:
    """Normalized weights ``exp(S_n phi(g_w(a)) - n P_hat)`` on depth-n cylinders.

    Parameters
    ----------
    n : int
        Cylinder depth, at least 1.
    P_hat : float
        Pressure estimate used in the weights; it only changes
        ``log_normalizer`` since weights are renormalized.
    budget : int
        Maximum number of atoms. When all words of length n do not fit, the
        innermost letters go through the grid adjoint instead.
    """
    if n < 1:
        raise ValueError("depth must be >= 1")
    trunc = trunc or DEFAULT_TRUNCATION
    a = sys.midpoint if anchor is None else float(anchor)
    if not sys.contains(a):
        raise ValueError(f"anchor {a} outside the hull")
    letters, M = _alphabet(sys, pot, trunc)
    cols = letters.size + (2 if M is not None else 0)

    if cols ** n <= budget:
        p = n
    else:
        p = max(1, int(math.floor(math.log(budget / grid_size) / math.log(cols))))
        p = min(p, n - 1)
    inner = n - p

    if inner == 0:
        z = np.array([a])
        logw = np.zeros(1)
    else:
        plan = operator_plan(sys, pot, grid_size, trunc)
        nodes = grid_nodes(sys, grid_size)
        r = _hat_weights(nodes, a)
        log_scale = 0.0
        for _ in range(inner):
            r = plan.adjoint_values(r)
            s = r.sum()
            if not s > 0:
                raise NumericError("adjoint iterate vanished")
            r = r / s
            log_scale += math.log(s)
        keep = r > 0
        z = nodes[keep]
        logw = np.log(r[keep]) + log_scale

    words = np.zeros((z.size, 0), dtype=np.int64)
    tail_letter = None if M is None else M + 1
    shifted = z
    first = np.zeros_like(z)
    for _ in range(p):
        pts = sys.branch(letters[:, None], z[None, :])
        lw = pot.log_weights(sys, letters[:, None], z[None, :]) + np.zeros_like(pts)
        lab = np.repeat(letters, z.size).reshape(letters.size, z.size)
        if M is not None:
            tp, tw = pot.tail_atoms(sys, M, z)
            with np.errstate(divide="ignore"):
                pts = np.concatenate([pts, tp.T], axis=0)
                lw = np.concatenate([lw, np.log(tw.T)], axis=0)
            lab = np.concatenate([lab, np.full((2, z.size), tail_letter)], axis=0)
        K = z.size
        shifted = np.tile(z, pts.shape[0])
        first = lw.ravel()
        logw = np.tile(logw, pts.shape[0]) + first
        words = np.concatenate([lab.reshape(-1, 1), np.tile(words, (pts.shape[0], 1))], axis=1)
        z = pts.ravel()
        del K

    logw = logw - n * P_hat
    finite = np.isfinite(logw)
    if not finite.any():
        raise NumericError("every cylinder weight underflows")
    top = logw[finite].max()
    w = np.where(finite, np.exp(logw - top), 0.0)
    total = w.sum()
    w /= total
    # keep the lexicographic order of words; tail atoms may interleave
    order = np.lexsort(words.T[::-1]) if M is not None else np.arange(w.size)
    words, z, shifted, w, first = words[order], z[order], shifted[order], w[order], first[order]
    lumped = 0.0
    if M is not None:
        lumped = float(w[np.any(words == tail_letter, axis=1)].sum())
    return CylinderMeasure(
        depth=n, words=words, representatives=z, shifted=shifted, weights=w, anchor=a,
        pressure_used=float(P_hat), first_log_weight=first, inner_depth=inner,
        tail_letter=tail_letter, truncated_mass=0.0, lumped_mass=lumped,
        log_normalizer=float(top + math.log(total)),
    )


def integrate(mu: CylinderMeasure, f) -> float:
    """``sum_w weight(w) f(x_w)`` for a GridFunction or a callable."""
    vals = np.asarray(f(mu.representatives), dtype=float) * np.ones(mu.size)
    return float(np.dot(mu.weights, vals))


def invariant_measure(mu: CylinderMeasure, h: GridFunction) -> CylinderMeasure:
    """``m = h mu``, renormalized."""
    if not np.all(h.values > 0):
        raise ValueError("h must be positive on the nodes")
    return mu.with_weights(mu.weights * h(mu.representatives))


def invariance_gaps(sys: SystemSpec, m: CylinderMeasure, test_fns=None) -> dict:
    fns = DEFAULT_TEST_FUNCTIONS if test_fns is None else test_fns
    out = {}
    for name, f in fns.items():
        a = float(np.dot(m.weights, np.asarray(f(m.shifted), dtype=float) * np.ones(m.size)))
        b = float(np.dot(m.weights, np.asarray(f(m.representatives), dtype=float) * np.ones(m.size)))
        out[name] = abs(a - b)
    return out


def invariance_verify(sys: SystemSpec, m: CylinderMeasure, test_fns=None) -> float:
    """Max over test functions of ``|m(f o T) - m(f)|`` at the representatives."""
    return max(invariance_gaps(sys, m, test_fns).values())


def prefix_birkhoff(sys: SystemSpec, pot: Potential, words: np.ndarray, x: float) -> np.ndarray:
    """``S_m phi(g_w(x))`` for each row w of a (U, m) word array."""
    U, m = words.shape
    z = np.full(U, float(x))
    S = np.zeros(U)
    for j in range(m - 1, -1, -1):
        S += pot.log_weights(sys, words[:, j], z)
        z = sys.branch(words[:, j], z)
    return S


@dataclass(frozen=True)
class GibbsLevel:
    m: int
    min_ratio: float
    max_ratio: float
    lower: float
    upper: float
    cylinders: int

    @property
    def ok(self) -> bool:
        return self.min_ratio >= self.lower * (1 - 1e-9) and self.max_ratio <= self.upper * (1 + 1e-9)


@dataclass(frozen=True)
class GibbsReport:
    C_hat: float
    levels: list

    @property
    def ok(self) -> bool:
        return all(lv.ok for lv in self.levels)

    @property
    def max_deviation(self) -> float:
        """Largest ``|ratio - 1|`` over all levels."""
        return max(max(abs(lv.min_ratio - 1), abs(lv.max_ratio - 1)) for lv in self.levels)


def gibbs_verify(sys: SystemSpec, pot: Potential, mu: CylinderMeasure, K: BowenSequence,
                 P_hat: float, max_level: int | None = None) -> GibbsReport:
    """Ratios ``mu([u]) / exp(S_m phi(g_u(a)) - m P_hat)`` per level m.

    Cylinders through the lumped tail are skipped. Bounds at level m are
    ``[C e^{-K_m}, e^{K_m}]`` with C the smallest ratio at level 1.
    """
    top = mu.explicit_depth if max_level is None else min(max_level, mu.explicit_depth)
    if len(K) < top:
        raise ValueError(f"need K_m up to m = {top}, have {len(K)}")
    levels = []
    C_hat = None
    for m in range(1, top + 1):
        words, mass = mu.marginal(m)
        if mu.tail_letter is not None:
            keep = ~np.any(words == mu.tail_letter, axis=1)
            words, mass = words[keep], mass[keep]
        ref = np.exp(prefix_birkhoff(sys, pot, words, mu.anchor) - m * P_hat)
        ratio = mass / ref
        if C_hat is None:
            C_hat = float(ratio.min())
        Km = K[m]
        levels.append(GibbsLevel(m, float(ratio.min()), float(ratio.max()),
                                 C_hat * math.exp(-Km), math.exp(Km), len(words)))
    return GibbsReport(C_hat, levels)


def jacobian_verify(sys: SystemSpec, pot: Potential, mu: CylinderMeasure, lambda_hat: float) -> float:
    """Max over cylinders A of ``|mu(T A) - sum_{w in A} weight(w) lam e^{-phi(x_w)}|``."""
    if mu.depth < 2 and mu.explicit_depth < 2:
        raise ValueError("need depth >= 2")
    kmax = min(mu.depth - 1, mu.explicit_depth)
    jac = mu.weights * lambda_hat * np.exp(-mu.first_log_weight)
    worst = 0.0
    for k in range(1, kmax + 1):
        uniq, inv = _group(mu.words[:, :k])
        rhs = np.bincount(inv, weights=jac, minlength=len(uniq))
        if k == 1:
            lhs = np.full(len(uniq), mu.weights.sum())
        else:
            tails, masses = mu.marginal(k - 1)
            both, binv = _group(np.concatenate([tails, uniq[:, 1:]]))
            lookup = np.zeros(len(both))
            lookup[binv[:len(tails)]] = masses
            lhs = lookup[binv[len(tails):]]
        keep = np.ones(len(uniq), dtype=bool)
        if mu.tail_letter is not None:
            keep = uniq[:, 0] != mu.tail_letter
        worst = max(worst, float(np.abs(lhs - rhs)[keep].max()))
    return worst


def tv_distance(mu: CylinderMeasure, nu: CylinderMeasure, m: int) -> float:
    """Total variation distance between the depth-m marginals."""
    wa, ma = mu.marginal(m)
    wb, mb = nu.marginal(m)
    both, inv = _group(np.concatenate([wa, wb]))
    diff = np.zeros(len(both))
    np.add.at(diff, inv[:len(wa)], ma)
    np.add.at(diff, inv[len(wa):], -mb)
    return 0.5 * float(np.abs(diff).sum())


def refinement_ratios(sys: SystemSpec, pot: Potential, mu: CylinderMeasure,
                      trunc: TruncationPolicy | None = None, grid_size: int = 257) -> tuple[float, float]:
    """Min and max of ``marginal_{n-1}(mu) / nu`` with nu built directly at depth n-1."""
    if mu.inner_depth or mu.depth < 2:
        raise ValueError("needs a fully enumerated measure of depth >= 2")
    nu = build_eigenmeasure(sys, pot, mu.depth - 1, mu.pressure_used, trunc, grid_size, mu.anchor)
    words, mass = mu.marginal(mu.depth - 1)
    if not np.array_equal(words, nu.words):
        raise ValueError("word sets differ")
    r = mass / nu.weights
    return float(r.min()), float(r.max())


def max_atom(mu: CylinderMeasure) -> float:
    """Largest cylinder mass at the enumerated depth."""
    return float(mu.marginal(mu.explicit_depth)[1].max())
