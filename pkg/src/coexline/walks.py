"""Lazy nearest-neighbour walks and their versions conditioned to stay non-negative.

A ``nu_a`` walk steps +1, 0, -1 with probabilities a^2, 2a, 1 over (a + 1)^2.
Its survival probabilities q_r(h) (start at height h, do not visit -1 during r
steps) drive an exact sequential sampler: at height h with r steps left, step
w is taken with probability nu_a(w) q_{r-1}(h + w) / q_r(h).

Paths are integer arrays (s_0 = 0, s_1, ..., s_m); increments are int8 arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from coexline.errors import ResourceLimitError

DEFAULT_N_MAX_CAP = 100_000
# Largest stored table, in float64 entries (800 MB).
MAX_TABLE_ENTRIES = 100_000_000
# Heights whose hitting probability of -1 is below 2**-70 are read as sure survivors.
_TAIL_BITS = 70


@dataclass(frozen=True)
class StepLaw:
    a: float
    p_up: float
    p_zero: float
    p_down: float

    @property
    def mean(self) -> float:
        return (self.a - 1.0) / (self.a + 1.0)

    @property
    def variance(self) -> float:
        return 2.0 * self.a / (self.a + 1.0) ** 2

    @property
    def probs(self) -> np.ndarray:
        """Probabilities ordered by step value (-1, 0, +1)."""
        return np.array([self.p_down, self.p_zero, self.p_up])

    def log_prob(self, steps) -> np.ndarray:
        """Elementwise log nu_a(step) for steps in {-1, 0, 1}."""
        return np.log(self.probs)[np.asarray(steps) + 1]


def step_law(a: float) -> StepLaw:
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    d = (a + 1.0) ** 2
    return StepLaw(a=float(a), p_up=a * a / d, p_zero=2.0 * a / d, p_down=1.0 / d)


def weight_w(a: float) -> float:
    """w_a = a/4 + 1/(4a) + 1/2, the mass of a^step under the unbiased lazy walk."""
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    return a / 4.0 + 1.0 / (4.0 * a) + 0.5


class SurvivalTable:
    """Survival probabilities q_r(h) for 0 <= r <= n_max.

    Stored as a dense ``(n_max + 1, width)`` array over heights ``h < width``.
    Entries with ``h >= r`` are exactly 1.  For ``a > 1`` the width is cut
    where ``a**(-2(h+1)) < 2**-70`` and higher heights read as 1; this is the
    probability of ever reaching -1 from h, so the cut perturbs no entry by
    more than that bound.
    """

    def __init__(self, a: float, n_max: int, values: np.ndarray):
        self.a = float(a)
        self.n_max = int(n_max)
        self.law = step_law(a)
        self.width = values.shape[1]
        # padded[r, h + 1] = q_r(h) for -1 <= h <= width; column 0 is the absorbing height
        padded = np.empty((values.shape[0], self.width + 2))
        padded[:, 0] = 0.0
        padded[:, 1:-1] = values
        padded[:, -1] = 1.0
        padded.setflags(write=False)
        self._padded = padded

    def __repr__(self):
        return f"SurvivalTable(a={self.a}, n_max={self.n_max}, width={self.width})"

    @property
    def values(self) -> np.ndarray:
        """q_r(h) for 0 <= r <= n_max and 0 <= h < width."""
        return self._padded[:, 1:-1]

    @property
    def p(self) -> np.ndarray:
        """p_l = q_l(0) for l = 0..n_max."""
        return self._padded[:, 1]

    def q(self, r, h):
        """Vectorised lookup of q_r(h); negative heights give 0."""
        r = np.asarray(r)
        h = np.asarray(h)
        out = self._padded[r, np.clip(h + 1, 0, self.width + 1)]
        return np.where((h >= r) & (h >= 0), 1.0, out)

    def neighbour_weights(self, r, h):
        """(q_r(h-1), q_r(h), q_r(h+1)) for heights h >= 0, as three arrays."""
        flat = self._padded.ravel()
        stride = self.width + 2
        top = self.width + 1
        base = np.asarray(r) * stride
        return (
            flat[base + np.minimum(h, top)],
            flat[base + np.minimum(h + 1, top)],
            flat[base + np.minimum(h + 2, top)],
        )

    def step_kernel(self, r: int, h: int) -> np.ndarray:
        """Law of the next step (-1, 0, +1) from height h with r >= 1 steps left."""
        if not 1 <= r <= self.n_max:
            raise ValueError(f"r={r} outside 1..{self.n_max}")
        w = self.law.probs * self.q(r - 1, np.array([h - 1, h, h + 1]))
        return w / w.sum()

    def to_csv(self, path) -> None:
        """Debug dump: line r holds q_r(0), ..., q_r(r-1)."""
        with open(path, "w") as fh:
            for r in range(self.n_max + 1):
                row = self.q(r, np.arange(r)) if r else np.empty(0)
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _table_width(a: float, n_max: int) -> int:
    if a > 1:
        cut = math.ceil(_TAIL_BITS * math.log(2) / (2 * math.log(a)))
        return max(1, min(n_max, cut))
    return max(1, n_max)


def survival_table(a: float, n_max: int, cap: int = DEFAULT_N_MAX_CAP) -> SurvivalTable:
    """Build (or fetch from cache) the survival table of the ``nu_a`` walk."""
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if n_max > cap:
        raise ResourceLimitError(f"n_max={n_max} exceeds cap {cap}")
    width = _table_width(a, n_max)
    if (n_max + 1) * width > MAX_TABLE_ENTRIES:
        raise ResourceLimitError(
            f"survival table for a={a}, n_max={n_max} needs {(n_max + 1) * width} entries"
        )
    return _cached_table(float(a), int(n_max))


@lru_cache(maxsize=32)
def _cached_table(a: float, n_max: int) -> SurvivalTable:
    law = step_law(a)
    width = _table_width(a, n_max)
    values = np.empty((n_max + 1, width))
    values[0] = 1.0
    # ext[k] holds q_{r-1}(k - 1); ext[0] is the absorbing height -1
    ext = np.empty(width + 2)
    ext[0] = 0.0
    ext[-1] = 1.0
    for r in range(1, n_max + 1):
        ext[1:-1] = values[r - 1]
        row = law.p_down * ext[:-2] + law.p_zero * ext[1:-1] + law.p_up * ext[2:]
        row[r:] = 1.0
        values[r] = row
    return SurvivalTable(a, n_max, values)


def steps_of(path) -> np.ndarray:
    path = np.asarray(path)
    return np.diff(path).astype(np.int8)


def path_from_steps(steps) -> np.ndarray:
    steps = np.asarray(steps, dtype=np.int64)
    out = np.zeros(steps.shape[:-1] + (steps.shape[-1] + 1,), dtype=np.int64)
    np.cumsum(steps, axis=-1, out=out[..., 1:])
    return out


def conditioned_walks(
    table: SurvivalTable,
    lengths,
    draw: Callable[[int, np.ndarray], np.ndarray],
    record: bool = True,
):
    """Run the h-transform sampler for a batch of walks of varying lengths.

    ``draw(k, rows)`` must return one uniform in [0, 1) per entry of ``rows``
    (original batch indices) for step ``k``.  Only walks with ``k < length``
    are passed.  Returns an int8 ``(B, max_length)`` increment matrix padded
    with zeros, or the endpoint heights when ``record`` is False.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    n_walks = lengths.size
    if n_walks and lengths.max() > table.n_max:
        raise ValueError(f"length {lengths.max()} exceeds table n_max={table.n_max}")
    if n_walks and lengths.min() < 0:
        raise ValueError("lengths must be non-negative")
    longest = int(lengths.max()) if n_walks else 0
    order = np.argsort(-lengths, kind="stable")
    sorted_len = lengths[order]
    # number of walks still running at step k, via the descending sort
    running = np.searchsorted(-sorted_len, -np.arange(longest), side="left")
    p_down, p_zero, p_up = table.law.probs
    uniform = n_walks > 0 and sorted_len[0] == sorted_len[-1]
    h = np.zeros(n_walks, dtype=np.int64)
    steps = np.zeros((n_walks, longest), dtype=np.int8) if record else None
    for k in range(longest):
        cnt = running[k]
        rows = order[:cnt]
        hk = h[:cnt]
        r1 = sorted_len[:cnt] - k - 1
        if uniform:
            r1 = int(r1[0])
        qd, qz, qu = table.neighbour_weights(r1, hk)
        wd = p_down * qd
        wz = p_zero * qz
        wu = p_up * qu
        x = draw(k, rows) * (wd + wz + wu)
        step = (x >= wd).astype(np.int8) + (x >= wd + wz).astype(np.int8) - 1
        hk += step
        if record:
            steps[rows, k] = step
    if record:
        return steps
    out = np.empty(n_walks, dtype=np.int64)
    out[order] = h
    return out


def _check_table(a: float, m: int, table: SurvivalTable) -> None:
    if table.a != float(a):
        raise ValueError(f"table built for a={table.a}, not a={a}")
    if m < 0 or m > table.n_max:
        raise ValueError(f"m={m} outside 0..{table.n_max}")


def sample_conditioned(a: float, m: int, table: SurvivalTable, rng: np.random.Generator) -> np.ndarray:
    """Exact draw of an m-step ``nu_a`` path conditioned to stay >= 0."""
    _check_table(a, m, table)
    u = rng.random(m)
    steps = conditioned_walks(table, [m], lambda k, rows: u[k : k + 1])
    return path_from_steps(steps[0])


def sample_conditioned_batch(
    a: float, m: int, size: int, table: SurvivalTable, rng: np.random.Generator, record: bool = True
):
    """``size`` independent conditioned walks of length m; increments or endpoints."""
    _check_table(a, m, table)
    return conditioned_walks(
        table, np.full(size, m), lambda k, rows: rng.random(rows.size), record=record
    )


def _unconditioned_steps(law: StepLaw, shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(shape)
    return ((u >= law.p_down).astype(np.int8) + (u >= law.p_down + law.p_zero)) - 1


def sample_conditioned_rejection(a: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """Same law as :func:`sample_conditioned`, by rejecting paths that visit -1.

    Only offered for ``a > 1``, where the acceptance probability stays above
    ``1 - 1/a**2`` for every m.
    """
    paths, _ = rejection_batch(a, m, 1, rng)
    return paths[0]


def rejection_batch(a: float, m: int, size: int, rng: np.random.Generator, block: int = 256):
    """Draw ``size`` conditioned paths by rejection; also return the proposal count."""
    if not a > 1:
        raise ValueError(f"rejection sampling needs a > 1, got {a}")
    if m < 0:
        raise ValueError("m must be non-negative")
    law = step_law(a)
    accepted = []
    n_acc = 0
    proposals = 0
    while n_acc < size:
        k = min(block, max(1, int((size - n_acc) * 1.2) + 1))
        paths = path_from_steps(_unconditioned_steps(law, (k, m), rng))
        ok = paths.min(axis=1) >= 0
        # stop counting proposals at the one that completes the batch
        idx = np.flatnonzero(ok)[: size - n_acc]
        proposals += (idx[-1] + 1) if idx.size == size - n_acc else k
        accepted.append(paths[idx])
        n_acc += idx.size
    return np.concatenate(accepted, axis=0), proposals


def primed_increments(steps, side: str, coins) -> np.ndarray:
    """Apply the primed coupling to increments, given Bernoulli(1/2) ``coins``.

    right: +1 -> 1, -1 -> 0, 0 -> coin.   left: +1 -> 0, -1 -> -1, 0 -> -coin.
    """
    steps = np.asarray(steps)
    coins = np.asarray(coins).astype(np.int8)
    if side == "right":
        out = np.where(steps == 1, 1, np.where(steps == -1, 0, coins))
    elif side == "left":
        out = np.where(steps == 1, 0, np.where(steps == -1, -1, -coins))
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return out.astype(np.int8)


def couple_primed(path, side: str, rng: np.random.Generator) -> np.ndarray:
    """Primed companion path of ``path`` using fresh fair coins."""
    steps = steps_of(path)
    if steps.size and not np.isin(steps, (-1, 0, 1)).all():
        raise ValueError("path increments must lie in {-1, 0, 1}")
    coins = rng.random(steps.size) < 0.5
    return path_from_steps(primed_increments(steps, side, coins))
