"""Continuous-time simulation of the open TASEP (direct Gillespie method).

Used as a check of stationarity that shares no code with the samplers or the
generator solve: occupations are time-averaged over a long run and compared
with exact stationary marginals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from coexline.rng import as_generator

ENTRY, EXIT, HOP = "entry", "exit", "hop"


@dataclass(frozen=True)
class SimConfig:
    n: int
    alpha: float
    beta: float
    horizon: float
    burn_in: float | None = None
    seed: int | None = None
    batches: int = 32

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("rates must be non-negative")
        if self.batches < 20:
            raise ValueError("batch-means needs at least 20 batches")
        if not self.horizon > self.effective_burn_in >= 0:
            raise ValueError("need horizon > burn_in >= 0")

    @property
    def effective_burn_in(self) -> float:
        return self.horizon / 10.0 if self.burn_in is None else float(self.burn_in)


@dataclass
class TimeAverageReport:
    mean_occupation: np.ndarray
    standard_errors: np.ndarray
    total_sim_time: float
    event_count: int
    batch_means: np.ndarray = field(repr=False)


class _ActiveBonds:
    """Set of bonds k (sites k, k+1 as 0-based k) holding a (1, 0) pair, with O(1) update."""

    def __init__(self):
        self.items: list[int] = []
        self.pos: dict[int, int] = {}

    def __len__(self):
        return len(self.items)

    def add(self, k: int) -> None:
        if k not in self.pos:
            self.pos[k] = len(self.items)
            self.items.append(k)

    def discard(self, k: int) -> None:
        i = self.pos.pop(k, None)
        if i is None:
            return
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i


def simulate(config: SimConfig, rng=None, trace: list | None = None) -> TimeAverageReport:
    """Time-averaged occupations over (burn_in, horizon] with batch-means errors.

    Starts from the empty lattice.  ``trace``, if given, receives
    ``(time, event, site)`` tuples with 1-based sites.
    """
    rng = as_generator(config.seed if rng is None else rng)
    n, alpha, beta = config.n, config.alpha, config.beta
    t0 = config.effective_burn_in
    batch_len = (config.horizon - t0) / config.batches
    edges = t0 + batch_len * np.arange(1, config.batches + 1)
    edges[-1] = config.horizon

    tau = [0] * n
    bonds = _ActiveBonds()
    # integral of tau[i] dt since last_flush, updated lazily per site
    acc = np.zeros(n)
    last = [t0] * n
    batch_means = np.zeros((config.batches, n))
    batch = 0
    t = 0.0
    events = 0
    buf = rng.random(8192)
    bi = 0

    def flip(i: int, now: float) -> None:
        if now > t0:
            acc[i] += tau[i] * (now - max(last[i], t0))
            last[i] = now
        tau[i] ^= 1
        for k in (i - 1, i):
            if 0 <= k < n - 1:
                if tau[k] == 1 and tau[k + 1] == 0:
                    bonds.add(k)
                else:
                    bonds.discard(k)

    def close_batches_until(now: float) -> None:
        nonlocal batch
        while batch < config.batches and edges[batch] <= now:
            edge = edges[batch]
            start = edges[batch - 1] if batch else t0
            for i in range(n):
                acc[i] += tau[i] * (edge - max(last[i], t0))
                last[i] = edge
            batch_means[batch] = acc / (edge - start)
            acc[:] = 0.0
            batch += 1

    while True:
        rate_in = alpha if tau[0] == 0 else 0.0
        rate_out = beta if tau[-1] == 1 else 0.0
        total = rate_in + rate_out + len(bonds)
        if bi + 2 > buf.size:
            buf = rng.random(8192)
            bi = 0
        u1, u2 = buf[bi], buf[bi + 1]
        bi += 2
        if total == 0.0:
            t_next = math.inf
        else:
            t_next = t - math.log1p(-u1) / total
        if t_next > config.horizon:
            close_batches_until(config.horizon)
            break
        close_batches_until(t_next)
        t = t_next
        x = u2 * total
        if x < rate_in:
            flip(0, t)
            kind, site = ENTRY, 1
        elif x < rate_in + rate_out:
            flip(n - 1, t)
            kind, site = EXIT, n
        else:
            j = min(int((x - rate_in - rate_out)), len(bonds) - 1)
            k = bonds.items[j]
            flip(k, t)
            flip(k + 1, t)
            kind, site = HOP, k + 1
        events += 1
        if trace is not None:
            trace.append((t, kind, site))

    means = batch_means.mean(axis=0)
    se = batch_means.std(axis=0, ddof=1) / math.sqrt(config.batches)
    return TimeAverageReport(
        mean_occupation=means,
        standard_errors=se,
        total_sim_time=config.horizon - t0,
        event_count=events,
        batch_means=batch_means,
    )
