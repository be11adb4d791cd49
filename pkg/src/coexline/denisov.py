"""Exact sampler of the open TASEP stationary measure.

One draw picks the first-minimum location ``T`` of a weighted lazy walk S,
then an a-walk conditioned to stay non-negative (run backwards from ``T``), a
-1 step at ``T``, and a b-walk conditioned to stay non-negative after ``T``.
Primed companions replace every -1 step by 0, every +1 by 1 and every 0 by a
fair coin; the primed increments are the occupation vector, and the first
minimiser of ``S'_j - j/2`` is the shock location tau*.

Uniform layout of one replica (``2n + 1`` values from its own stream)::

    u[0]             minimum location T
    u[1 : n]         walk steps, left block first then right block
                     (for T = 0 the right block uses u[1 : n + 1])
    u[n + 1 : 2n+1]  coin for position j of S' (used only where the S step is 0)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from coexline.model import first_argmin
from coexline.parallel import chunk_ranges, map_ordered, resolve_workers
from coexline.rng import replica_rng
from coexline.walks import (
    SurvivalTable,
    conditioned_walks,
    path_from_steps,
    primed_increments,
    steps_of,
    survival_table,
    weight_w,
)

_CHUNK_UNIFORMS = 4_000_000


@dataclass(frozen=True)
class MinLocationLaw:
    """Law of the first-minimum location T on {0, ..., n}."""

    n: int
    a: float
    b: float
    log_weights: np.ndarray
    pmf: np.ndarray
    cdf: np.ndarray
    log_C: float

    @property
    def C(self) -> float:
        return math.exp(self.log_C)


def tn_law(
    a: float,
    b: float,
    n: int,
    table_a: SurvivalTable | None = None,
    table_b: SurvivalTable | None = None,
) -> MinLocationLaw:
    """Weights (a/4) w_a^(m-1) w_b^(n-m) p^a_(m-1) p^b_(n-m) for m >= 1, w_b^n p^b_n for m = 0."""
    if not (a > 0 and b > 0):
        raise ValueError(f"a and b must be positive, got {a}, {b}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if table_a is None and table_b is None:
        return _cached_law(float(a), float(b), int(n))
    table_a = table_a or survival_table(a, n - 1)
    table_b = table_b or survival_table(b, n)
    return _build_law(a, b, n, table_a, table_b)


@lru_cache(maxsize=64)
def _cached_law(a: float, b: float, n: int) -> MinLocationLaw:
    return _build_law(a, b, n, survival_table(a, n - 1), survival_table(b, n))


def _build_law(a, b, n, table_a, table_b) -> MinLocationLaw:
    if table_a.a != a or table_b.a != b:
        raise ValueError("survival tables built for the wrong parameters")
    if table_a.n_max < n - 1 or table_b.n_max < n:
        raise ValueError("survival tables do not cover n steps")
    pa = table_a.p[:n]
    pb = table_b.p[: n + 1]
    if (pa <= 0).any() or (pb <= 0).any():
        raise ValueError("survival probability underflowed to zero; n too large for this a or b")
    m = np.arange(1, n + 1)
    log_wa, log_wb = math.log(weight_w(a)), math.log(weight_w(b))
    logw = np.empty(n + 1)
    logw[0] = n * log_wb + math.log(pb[n])
    logw[1:] = (
        math.log(a / 4.0) + (m - 1) * log_wa + (n - m) * log_wb + np.log(pa[m - 1]) + np.log(pb[n - m])
    )
    log_C = float(logsumexp(logw))
    pmf = np.exp(logw - log_C)
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    for arr in (logw, pmf, cdf):
        arr.setflags(write=False)
    return MinLocationLaw(n=n, a=float(a), b=float(b), log_weights=logw, pmf=pmf, cdf=cdf, log_C=log_C)


def _tn_from_uniform(law: MinLocationLaw, u):
    return np.minimum(np.searchsorted(law.cdf, u, side="right"), law.n)


def sample_tn(law: MinLocationLaw, rng: np.random.Generator) -> int:
    return int(_tn_from_uniform(law, rng.random()))


def _as_path(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.int64)
    if p.size == 0:
        return np.zeros(1, dtype=np.int64)
    return p


def _check_blocks(L, R, n, m):
    if not 0 <= m <= n:
        raise ValueError(f"m={m} outside 0..{n}")
    left_steps = len(L) - 1
    if m == 0:
        if left_steps != 0:
            raise ValueError("m = 0 needs an empty left block")
    elif left_steps != m - 1:
        raise ValueError(f"left block has {left_steps} steps, expected {m - 1}")
    if len(R) - 1 != n - m:
        raise ValueError(f"right block has {len(R) - 1} steps, expected {n - m}")


def concat(L, R, n: int, m: int) -> np.ndarray:
    """Join the reversed left block, a -1 step at m, and the right block."""
    L, R = _as_path(L), _as_path(R)
    _check_blocks(L, R, n, m)
    if m == 0:
        return R.copy()
    S = np.empty(n + 1, dtype=np.int64)
    S[:m] = L[::-1] - L[-1]
    S[m] = -L[-1] - 1
    S[m + 1 :] = S[m] + R[1:]
    return S


def concat_primed(L_primed, R_primed, n: int, m: int) -> np.ndarray:
    """As :func:`concat`, with a 0 step at m."""
    L, R = _as_path(L_primed), _as_path(R_primed)
    _check_blocks(L, R, n, m)
    if m == 0:
        return R.copy()
    S = np.empty(n + 1, dtype=np.int64)
    S[:m] = L[::-1] - L[-1]
    S[m] = -L[-1]
    S[m + 1 :] = S[m] + R[1:]
    return S


def tn_prime(S_primed) -> int:
    """Smallest minimiser of 2 S'_j - j."""
    S = np.asarray(S_primed, dtype=np.int64)
    return int(first_argmin(2 * S - np.arange(S.size)))


@dataclass(frozen=True)
class DenisovSample:
    n: int
    t_n: int
    L: np.ndarray
    L_primed: np.ndarray
    R: np.ndarray
    R_primed: np.ndarray
    S: np.ndarray
    S_primed: np.ndarray
    tau_star: int

    @property
    def occupations(self) -> np.ndarray:
        return steps_of(self.S_primed)

    def validate(self) -> None:
        dS, dSp = steps_of(self.S), steps_of(self.S_primed)
        m = self.t_n
        assert len(self.L) - 1 == max(m - 1, 0) and len(self.R) - 1 == self.n - m
        assert np.isin(dS, (-1, 0, 1)).all() and np.isin(dSp, (0, 1)).all()
        assert np.isin(dSp - dS, (0, 1)).all()
        if m >= 1:
            assert dS[m - 1] == -1 and dSp[m - 1] == 0
            assert (self.S[:m] > self.S[m]).all()
        assert (self.S[m:] >= self.S[m]).all()
        assert self.tau_star == tn_prime(self.S_primed)


@dataclass
class StationaryBatch:
    """Rows are replicas: T, tau*, S increments and occupations (S' increments)."""

    n: int
    t_n: np.ndarray
    tau_star: np.ndarray
    steps: np.ndarray
    occupations: np.ndarray

    def __len__(self):
        return self.t_n.size

    @classmethod
    def concatenate(cls, parts):
        parts = list(parts)
        return cls(
            n=parts[0].n,
            t_n=np.concatenate([p.t_n for p in parts]),
            tau_star=np.concatenate([p.tau_star for p in parts]),
            steps=np.concatenate([p.steps for p in parts]),
            occupations=np.concatenate([p.occupations for p in parts]),
        )

    def validate(self) -> None:
        """Vectorised check of the sample invariants, including the first-minimum property."""
        dS, dSp = self.steps, self.occupations
        assert np.isin(dS, (-1, 0, 1)).all() and np.isin(dSp, (0, 1)).all()
        assert np.isin(dSp.astype(np.int16) - dS, (0, 1)).all()
        rows = np.flatnonzero(self.t_n >= 1)
        assert (dS[rows, self.t_n[rows] - 1] == -1).all()
        assert (dSp[rows, self.t_n[rows] - 1] == 0).all()
        S = path_from_steps(dS)
        assert (first_argmin(S, axis=1) == self.t_n).all()
        assert (tau_star_rows(dSp) == self.tau_star).all()


def tau_star_rows(occupations: np.ndarray) -> np.ndarray:
    """Row-wise first minimiser of 2 s_j - j."""
    H = path_from_steps(occupations)
    return first_argmin(2 * H - np.arange(H.shape[1]), axis=1)


def draw_from_uniforms(a: float, b: float, n: int, U: np.ndarray) -> StationaryBatch:
    """Deterministic map from a ``(B, 2n + 1)`` uniform matrix to B stationary draws."""
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] != 2 * n + 1:
        raise ValueError(f"expected uniforms of shape (B, {2 * n + 1})")
    law = tn_law(a, b, n)
    table_a = survival_table(a, n - 1)
    table_b = survival_table(b, n)
    B = U.shape[0]
    T = _tn_from_uniform(law, U[:, 0])
    left_len = np.maximum(T - 1, 0)
    right_len = n - T
    right_off = 1 + left_len
    dL = conditioned_walks(table_a, left_len, lambda k, rows: U[rows, 1 + k])
    dR = conditioned_walks(table_b, right_len, lambda k, rows: U[rows, right_off[rows] + k])
    dLp = np.zeros((B, n + 1), dtype=np.int8)
    dLp[:, : dL.shape[1]] = dL
    dRp = np.zeros((B, n + 1), dtype=np.int8)
    dRp[:, : dR.shape[1]] = dR
    col = np.arange(n)[None, :]
    Tc = T[:, None]
    left = -np.take_along_axis(dLp, np.clip(Tc - 2 - col, 0, n), axis=1)
    right = np.take_along_axis(dRp, np.clip(col - Tc, 0, n), axis=1)
    dS = np.where(col < Tc - 1, left, np.where(col == Tc - 1, -1, right)).astype(np.int8)
    # Reversing and negating the left block turns its left-side coupling into the
    # right-side one, and the -1 at T maps to 0, so one elementwise map covers S'.
    dSp = primed_increments(dS, "right", U[:, n + 1 :] < 0.5)
    return StationaryBatch(n=n, t_n=T, tau_star=tau_star_rows(dSp), steps=dS, occupations=dSp)


def _sample_from_row(a, b, n, u) -> DenisovSample:
    batch = draw_from_uniforms(a, b, n, u[None, :])
    m = int(batch.t_n[0])
    dS = batch.steps[0].astype(np.int64)
    dSp = batch.occupations[0].astype(np.int64)
    if m >= 1:
        L = path_from_steps(-dS[: m - 1][::-1])
        Lp = path_from_steps(-dSp[: m - 1][::-1])
    else:
        L = Lp = np.zeros(1, dtype=np.int64)
    R, Rp = path_from_steps(dS[m:]), path_from_steps(dSp[m:])
    return DenisovSample(
        n=n,
        t_n=m,
        L=L,
        L_primed=Lp,
        R=R,
        R_primed=Rp,
        S=concat(L, R, n, m),
        S_primed=concat_primed(Lp, Rp, n, m),
        tau_star=int(batch.tau_star[0]),
    )


def sample_stationary(a: float, b: float, n: int, rng: np.random.Generator, validate: bool = __debug__) -> DenisovSample:
    """One exact draw; consumes ``2n + 1`` uniforms from ``rng``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sample = _sample_from_row(a, b, n, rng.random(2 * n + 1))
    if validate:
        sample.validate()
    return sample


def default_chunk(n: int) -> int:
    return int(min(50_000, max(1, _CHUNK_UNIFORMS // (2 * n + 1))))


def replica_uniforms(seed: int, start: int, stop: int, n: int) -> np.ndarray:
    return np.stack([replica_rng(seed, i).random(2 * n + 1) for i in range(start, stop)])


def _chunk_task(args) -> StationaryBatch:
    a, b, n, seed, start, stop, validate = args
    batch = draw_from_uniforms(a, b, n, replica_uniforms(seed, start, stop, n))
    if validate:
        batch.validate()
    return batch


def iter_batches(
    a: float,
    b: float,
    n: int,
    seed: int,
    replicas: int,
    start: int = 0,
    chunk: int | None = None,
    workers: int | None = None,
    validate: bool = True,
):
    """Yield replica chunks in order; replica i always uses stream ``mix64(seed, i)``."""
    if n < 1 or replicas < 0:
        raise ValueError("need n >= 1 and replicas >= 0")
    # build tables once in the parent so forked workers inherit them
    tn_law(a, b, n)
    ranges = chunk_ranges(replicas, chunk or default_chunk(n), start)
    tasks = [(a, b, n, seed, s, e, validate) for s, e in ranges]
    yield from map_ordered(_chunk_task, tasks, resolve_workers(workers))


def sample_batch(a: float, b: float, n: int, seed: int, replicas: int, **kwargs) -> StationaryBatch:
    """All replicas ``0..replicas-1`` (offset by ``start``) as one batch."""
    parts = list(iter_batches(a, b, n, seed, replicas, **kwargs))
    if not parts:
        empty = np.zeros((0, n), dtype=np.int8)
        return StationaryBatch(n, np.zeros(0, np.int64), np.zeros(0, np.int64), empty, empty.copy())
    return StationaryBatch.concatenate(parts)
