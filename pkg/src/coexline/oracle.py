"""Brute-force ground truth for small systems.

Configurations are indexed little-endian: an occupation vector ``tau`` maps to
``sum(tau[k] << k)`` (site 1 is the lowest bit), and a step vector ``w`` in
{-1, 0, 1}^n maps to ``sum((w[k] + 1) * 3**k)``.  Pairs of occupation vectors
``(w1, w2)`` map to ``i1 + 2**n * i2``.

Every routine here enumerates configurations and evaluates weights directly;
none of them calls the samplers they are used to check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from coexline.errors import ResourceLimitError, SolverError
from coexline.walks import step_law, weight_w

MAX_TWO_LINE_N = 10
MAX_PRW_N = 10
MAX_CTMC_N = 12
MAX_BAYES_N = 8
# Above this exponent spread, weights go through logs instead of direct powers.
_LOG_SPREAD = 500.0

KINDS = {"binary": 2, "ternary": 3, "pair": 4}


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probabilities over a finite configuration space, by configuration index."""

    kind: str
    n: int
    probs: np.ndarray
    normalizer: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.probs.shape != (KINDS[self.kind] ** self.n,):
            raise ValueError("probability vector does not match the support size")

    def check(self, tol: float = 1e-12) -> None:
        if (self.probs < 0).any():
            raise ValueError("negative probability")
        if abs(self.probs.sum() - 1.0) > tol:
            raise ValueError(f"probabilities sum to {self.probs.sum()}")


def binary_configs(n: int) -> np.ndarray:
    """Row i is the occupation vector with index i."""
    idx = np.arange(2**n)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)


def ternary_configs(n: int) -> np.ndarray:
    """Row i is the step vector in {-1, 0, 1}^n with index i."""
    idx = np.arange(3**n)
    digits = (idx[:, None] // 3 ** np.arange(n)) % 3
    return (digits - 1).astype(np.int8)


def ternary_index(steps) -> np.ndarray:
    steps = np.asarray(steps, dtype=np.int64)
    return ((steps + 1) * 3 ** np.arange(steps.shape[-1])).sum(axis=-1)


def binary_index(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    return (bits << np.arange(bits.shape[-1])).sum(axis=-1)


def _partial_sums(x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape[:-1] + (x.shape[-1] + 1,), dtype=np.int64)
    np.cumsum(x, axis=-1, out=out[..., 1:])
    return out


def _weights(exp_b: np.ndarray, exp_ab: np.ndarray, a: float, b: float) -> np.ndarray:
    """b**exp_b * (a*b)**exp_ab, by direct powers when the spread is small."""
    spread = exp_b.size and (np.abs(exp_b).max() * abs(math.log(b)) + np.abs(exp_ab).max() * abs(math.log(a * b)))
    if spread <= _LOG_SPREAD:
        return np.power(float(b), exp_b) * np.power(float(a * b), exp_ab)
    logw = exp_b * math.log(b) + exp_ab * math.log(a * b)
    return np.exp(logw - logw.max())


def _check_params(a, b):
    if not (a > 0 and b > 0):
        raise ValueError(f"a and b must be positive, got {a}, {b}")


def enumerate_two_line(a: float, b: float, n: int) -> DiscreteDistribution:
    """Pairs of 0/1 paths weighted by b^(s1_n - s2_n) / (ab)^min_j (s1_j - s2_j)."""
    _check_params(a, b)
    if not 1 <= n <= MAX_TWO_LINE_N:
        raise ResourceLimitError(f"two-line enumeration supports 1 <= n <= {MAX_TWO_LINE_N}")
    s = _partial_sums(binary_configs(n)).astype(np.int16)
    # axis 0: w2 index, axis 1: w1 index, so ravel order is i1 + 2**n * i2
    diff = s[None, :, :] - s[:, None, :]
    end = diff[..., -1].astype(np.int64)
    low = diff.min(axis=-1).astype(np.int64)
    w = _weights(end, -low, a, b).ravel()
    total = w.sum()
    return DiscreteDistribution("pair", n, w / total)


def marginal_first(dist: DiscreteDistribution) -> DiscreteDistribution:
    """Law of the first path of a pair distribution."""
    if dist.kind != "pair":
        raise ValueError("marginal_first needs a pair distribution")
    size = 2**dist.n
    return DiscreteDistribution("binary", dist.n, dist.probs.reshape(size, size).sum(axis=0))


def tasep_generator(alpha: float, beta: float, n: int) -> np.ndarray:
    """Dense generator of the open TASEP on {0,1}^n (rows sum to zero)."""
    size = 2**n
    Q = np.zeros((size, size))
    for x in range(size):
        if not x & 1:
            Q[x, x | 1] += alpha
        if x >> (n - 1) & 1:
            Q[x, x ^ (1 << (n - 1))] += beta
        for k in range(n - 1):
            if (x >> k) & 1 and not (x >> (k + 1)) & 1:
                Q[x, x ^ (0b11 << k)] += 1.0
    Q[np.diag_indices(size)] = -Q.sum(axis=1)
    return Q


def ctmc_stationary(alpha: float, beta: float, n: int, tol: float = 1e-12) -> DiscreteDistribution:
    """Solve pi Q = 0, sum(pi) = 1 by a dense solve with one equation replaced."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    if not 1 <= n <= MAX_CTMC_N:
        raise ResourceLimitError(f"CTMC solve supports 1 <= n <= {MAX_CTMC_N}")
    Q = tasep_generator(alpha, beta, n)
    A = Q.T.copy()
    A[-1, :] = 1.0
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    residual = np.abs(pi @ Q).max()
    if residual > tol or (pi < -tol).any():
        raise SolverError(f"stationary solve residual {residual:.3e} exceeds {tol:.1e}")
    pi = np.clip(pi, 0.0, None)
    return DiscreteDistribution("binary", n, pi / pi.sum())


def enumerate_prw(a: float, b: float, n: int) -> DiscreteDistribution:
    """Unbiased lazy walk reweighted by b^(s_n) / (ab)^min_j s_j; keeps the normaliser C."""
    _check_params(a, b)
    if not 1 <= n <= MAX_PRW_N:
        raise ResourceLimitError(f"walk enumeration supports 1 <= n <= {MAX_PRW_N}")
    steps = ternary_configs(n)
    s = _partial_sums(steps)
    base = np.prod(np.where(steps == 0, 0.5, 0.25), axis=1)
    w = base * _weights(s[:, -1], -s.min(axis=1), a, b)
    C = w.sum()
    return DiscreteDistribution("ternary", n, w / C, normalizer=float(C))


def first_min_index(path) -> int:
    """Smallest k with s_k equal to the path minimum."""
    return int(np.argmin(np.asarray(path)))


def denisov_exact_law(a: float, b: float, n: int, C: float | None = None) -> DiscreteDistribution:
    """Law of the step vector of S, from the split at its first minimum.

    A path with first minimum at t > 0 gets
    (a/4) w_a^(t-1) nu_a(reversed negated left block) w_b^(n-t) nu_b(right block) / C,
    and t = 0 gets w_b^n nu_b(path) / C.  ``C`` defaults to the normaliser of
    the minimum-location law, computed from survival probabilities.  The
    result is deliberately not renormalised.
    """
    from coexline.denisov import tn_law

    _check_params(a, b)
    if not 1 <= n <= MAX_PRW_N:
        raise ResourceLimitError(f"walk enumeration supports 1 <= n <= {MAX_PRW_N}")
    if C is None:
        C = tn_law(a, b, n).C
    steps = ternary_configs(n)
    t = np.argmin(_partial_sums(steps), axis=1)
    pos = np.arange(1, n + 1)[None, :]
    tc = t[:, None]
    log_nu_a = step_law(a).log_prob(-steps)
    log_nu_b = step_law(b).log_prob(steps)
    left = np.where(pos < tc, log_nu_a, 0.0).sum(axis=1)
    right = np.where(pos > tc, log_nu_b, 0.0).sum(axis=1)
    log_wa, log_wb = math.log(weight_w(a)), math.log(weight_w(b))
    logw = np.where(
        t > 0,
        math.log(a / 4.0) + (t - 1) * log_wa + (n - t) * log_wb + left + right,
        n * log_wb + right,
    )
    return DiscreteDistribution("ternary", n, np.exp(logw) / C)


_Q_KERNEL = np.array(
    # rows: omega' in (0, 1); columns: omega in (-1, 0, 1)
    [[1.0, 0.5, 0.0], [0.0, 0.5, 1.0]]
)


def _tilde_two_line(a: float, b: float, n: int) -> np.ndarray:
    """Pair law pushed to (w1, w1 - w2), as a (2**n, 3**n) array."""
    size = 2**n
    pair = enumerate_two_line(a, b, n).probs.reshape(size, size)  # [i2, i1]
    bits = binary_configs(n).astype(np.int64)
    i1, i2 = np.meshgrid(np.arange(size), np.arange(size), indexing="xy")
    tern = ternary_index(bits[i1] - bits[i2])
    out = np.zeros((size, 3**n))
    out[i1.ravel(), tern.ravel()] = pair.ravel()
    return out


def bayes_check(a: float, b: float, n: int) -> float:
    """max |P~_TL(w1, w) - P_RW(w) prod_j q(w1_j | w_j)| over all (w1, w)."""
    if not 1 <= n <= MAX_BAYES_N:
        raise ResourceLimitError(f"bayes_check supports 1 <= n <= {MAX_BAYES_N}")
    lhs = _tilde_two_line(a, b, n)
    prw = enumerate_prw(a, b, n).probs
    bits = binary_configs(n).astype(np.int64)
    steps = ternary_configs(n).astype(np.int64)
    kern = np.ones((bits.shape[0], steps.shape[0]))
    for j in range(n):
        kern *= _Q_KERNEL[bits[:, j][:, None], steps[:, j][None, :] + 1]
    rhs = prw[None, :] * kern
    return float(np.abs(lhs - rhs).max())


def tv_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    if p.kind != q.kind or p.n != q.n:
        raise ValueError(f"support mismatch: {p.kind}/{p.n} vs {q.kind}/{q.n}")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def occupation_tau_star_law(a: float, b: float, n: int) -> dict[tuple[int, int], float]:
    """Exact joint law of (occupation index, tau*) from the two-line marginal."""
    from coexline.model import tau_star

    occ = marginal_first(enumerate_two_line(a, b, n))
    configs = binary_configs(n)
    return {(i, tau_star(configs[i])): float(p) for i, p in enumerate(occ.probs)}


def empirical(kind: str, n: int, indices) -> DiscreteDistribution:
    counts = np.bincount(np.asarray(indices), minlength=KINDS[kind] ** n).astype(float)
    return DiscreteDistribution(kind, n, counts / counts.sum())


# Exact rational audit mode -------------------------------------------------


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def exact_two_line_marginal(a, b, n: int) -> dict[tuple[int, ...], Fraction]:
    """Two-line marginal in exact rationals, keyed by occupation tuple."""
    a, b = _frac(a), _frac(b)
    if not 1 <= n <= 8:
        raise ResourceLimitError("exact two-line marginal supports n <= 8")
    configs = list(itertools.product((0, 1), repeat=n))
    sums = {c: list(itertools.accumulate(c, initial=0)) for c in configs}
    out = dict.fromkeys(configs, Fraction(0))
    for c1 in configs:
        s1 = sums[c1]
        for c2 in configs:
            d = [x - y for x, y in zip(s1, sums[c2])]
            out[c1] += b ** d[-1] / (a * b) ** min(d)
    total = sum(out.values())
    return {c: v / total for c, v in out.items()}


def exact_generator_residual(a, b, n: int) -> Fraction:
    """max |(pi Q)(y)| for the exact two-line marginal pi; zero iff pi is stationary."""
    a, b = _frac(a), _frac(b)
    alpha, beta = 1 / (1 + a), 1 / (1 + b)
    pi = exact_two_line_marginal(a, b, n)
    flow = dict.fromkeys(pi, Fraction(0))
    for x, p in pi.items():
        moves = []
        if x[0] == 0:
            moves.append(((1,) + x[1:], alpha))
        if x[-1] == 1:
            moves.append((x[:-1] + (0,), beta))
        for k in range(n - 1):
            if x[k] == 1 and x[k + 1] == 0:
                moves.append((x[:k] + (0, 1) + x[k + 2 :], Fraction(1)))
        for y, rate in moves:
            flow[y] += p * rate
            flow[x] -= p * rate
    return max(abs(v) for v in flow.values())


def exact_prw_vs_denisov(a, b, n: int) -> Fraction:
    """max |P_RW(w) - split law(w)| in exact rationals, survival sums enumerated.

    The gap between the two normalisers (direct sum and minimum-location
    formula) is folded into the maximum.
    """
    a, b = _frac(a), _frac(b)
    if not 1 <= n <= 7:
        raise ResourceLimitError("exact walk comparison supports n <= 7")

    def nu(c):
        d = (c + 1) ** 2
        return {1: c * c / d, 0: 2 * c / d, -1: 1 / d}

    def survival(c, m):
        law = nu(c)
        total = Fraction(0)
        for w in itertools.product((-1, 0, 1), repeat=m):
            if min(itertools.accumulate(w, initial=0)) >= 0:
                total += math.prod((law[x] for x in w), start=Fraction(1))
        return total

    wa = a / 4 + 1 / (4 * a) + Fraction(1, 2)
    wb = b / 4 + 1 / (4 * b) + Fraction(1, 2)
    pa = [survival(a, m) for m in range(n)]
    pb = [survival(b, m) for m in range(n + 1)]
    C = sum(a / 4 * wa ** (m - 1) * wb ** (n - m) * pa[m - 1] * pb[n - m] for m in range(1, n + 1))
    C += wb**n * pb[n]
    paths = list(itertools.product((-1, 0, 1), repeat=n))
    raw = {}
    for w in paths:
        s = list(itertools.accumulate(w, initial=0))
        nu1 = math.prod((Fraction(1, 2) if x == 0 else Fraction(1, 4) for x in w), start=Fraction(1))
        raw[w] = nu1 * b ** s[-1] / (a * b) ** min(s)
    C_direct = sum(raw.values())
    nua, nub = nu(a), nu(b)
    worst = abs(C - C_direct)
    for w in paths:
        s = list(itertools.accumulate(w, initial=0))
        t = s.index(min(s))
        if t > 0:
            left = math.prod((nua[-x] for x in w[: t - 1]), start=Fraction(1))
            right = math.prod((nub[x] for x in w[t:]), start=Fraction(1))
            val = a / 4 * wa ** (t - 1) * left * wb ** (n - t) * right / C
        else:
            val = wb**n * math.prod((nub[x] for x in w), start=Fraction(1)) / C
        worst = max(worst, abs(val - raw[w] / C_direct))
    return worst
