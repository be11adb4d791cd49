"""Observables of stationary samples and Monte Carlo tests of the coexistence-line limits.

For a = b > 1 the fluctuation field

    W(t) = (h(floor(nt)) - min(floor(nt), tau*)/(1+a) - (floor(nt) - tau*)_+ a/(1+a)) / sqrt(n)

converges to sigma_a (B_{t ^ U} + B'_{(t-U)_+}) with sigma_a = sqrt(a)/(1+a),
and tau*/n to a uniform U.  Since (t ^ u) + (t - u)_+ = t, each W(t) is
N(0, sigma_a^2 t) and Cov(W(s), W(t)) = sigma_a^2 min(s, t) whatever U is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from coexline.denisov import DenisovSample, _chunk_task, default_chunk, tau_star_rows, tn_law
from coexline.parallel import chunk_ranges, map_ordered, resolve_workers
from coexline.walks import path_from_steps

DEFAULT_TIMES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
MIN_KS_SAMPLES = 100

# acceptance tolerances for the coexistence report
TOL_KS_UNIFORM = 0.02
TOL_MEAN_W = 0.01
TOL_VAR_REL = 0.05
TOL_KS_NORMAL = 0.02
TOL_COV = 0.01
TOL_CORR = 0.03
LLN_GAP = 0.05
LLN_FRACTION = 0.95
TIGHTNESS_SLACK = 2


@dataclass(frozen=True)
class FluctuationRecord:
    u_hat: float
    W: np.ndarray


@dataclass(frozen=True)
class LimitReference:
    a: float
    times: tuple[float, ...] = DEFAULT_TIMES

    @property
    def sigma_a(self) -> float:
        return sigma_a(self.a)

    def covariance(self) -> np.ndarray:
        t = np.asarray(self.times)
        return self.sigma_a**2 * np.minimum.outer(t, t)


def sigma_a(a: float) -> float:
    return math.sqrt(a) / (1.0 + a)


def grid_index(n: int, times) -> np.ndarray:
    """floor(n t), guarded against products like 0.3 * 10 = 2.9999999999999996."""
    t = np.asarray(times, dtype=float)
    if ((t < 0) | (t > 1)).any():
        raise ValueError("times must lie in [0, 1]")
    return np.floor(n * t + 1e-9).astype(np.int64)


def _centering(j, tau, a):
    j = np.asarray(j)
    tau = np.asarray(tau)
    return np.minimum(j, tau) / (1.0 + a) + np.maximum(j - tau, 0) * (a / (1.0 + a))


def fluctuation_matrix(occupations, tau_star, a: float, times) -> np.ndarray:
    """W(t) per row of an occupation matrix; shape (B, len(times))."""
    occupations = np.atleast_2d(occupations)
    n = occupations.shape[1]
    j = grid_index(n, times)[None, :]
    H = path_from_steps(occupations)[:, j[0]]
    tau = np.asarray(tau_star)[:, None]
    return (H - _centering(j, tau, a)) / math.sqrt(n)


def fluctuation_field(sample: DenisovSample, a: float, times=DEFAULT_TIMES) -> FluctuationRecord:
    W = fluctuation_matrix(sample.occupations[None, :], [sample.tau_star], a, times)[0]
    return FluctuationRecord(u_hat=sample.tau_star / sample.n, W=W)


def first_order_profile(sample: DenisovSample, times=DEFAULT_TIMES) -> np.ndarray:
    """h(floor(nt)) / n at each t."""
    H = path_from_steps(sample.occupations)
    return H[grid_index(sample.n, times)] / sample.n


def lln_sup_gap(occupations, tau_star, a: float) -> np.ndarray:
    """Per row, max over j of |h_j / n - random-density profile at j/n|."""
    occupations = np.atleast_2d(occupations)
    n = occupations.shape[1]
    H = path_from_steps(occupations)
    j = np.arange(n + 1)[None, :]
    prof = _centering(j, np.asarray(tau_star)[:, None], a)
    return np.abs(H - prof).max(axis=1) / n


def ks_statistic(samples, reference: str = "uniform01", sigma: float = 1.0) -> float:
    """Sup distance between the empirical CDF and Uniform(0,1) or N(0, sigma^2)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    if x.size < MIN_KS_SAMPLES:
        raise ValueError(f"need at least {MIN_KS_SAMPLES} samples, got {x.size}")
    if reference == "uniform01":
        cdf = scipy.stats.uniform.cdf
    elif reference == "normal":
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        cdf = scipy.stats.norm(scale=sigma).cdf
    else:
        raise ValueError(f"unknown reference {reference!r}")
    return float(scipy.stats.kstest(x, cdf).statistic)


def kolmogorov_sf(x: float, terms: int = 100) -> float:
    """P(K > x) for the Kolmogorov distribution, series truncated at ``terms``."""
    if x <= 0:
        return 1.0
    k = np.arange(1, terms + 1)
    val = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * x * x))
    return float(min(1.0, max(0.0, val)))


def ks_pvalue(statistic: float, size: int) -> float:
    return kolmogorov_sf(math.sqrt(size) * statistic)


def limit_marginal_sigma(a: float, t: float) -> float:
    if not a > 1:
        raise ValueError(f"coexistence line needs a > 1, got {a}")
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    return sigma_a(a) * math.sqrt(t)


def limit_covariance(a: float, s: float, t: float) -> float:
    if not a > 1:
        raise ValueError(f"coexistence line needs a > 1, got {a}")
    return sigma_a(a) ** 2 * min(s, t)


def simulate_limit_process(a: float, times, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of sigma_a (B_{t ^ U} + B'_{(t-U)_+}) on a time grid, shape (size, k)."""
    t = np.asarray(times, dtype=float)
    U = rng.random(size)[:, None]

    def brownian_at(clock):
        # clock is (size, k) and nondecreasing in k
        inc = np.diff(clock, axis=1, prepend=0.0)
        return np.cumsum(rng.standard_normal(clock.shape) * np.sqrt(inc), axis=1)

    left = brownian_at(np.minimum(t[None, :], U))
    right = brownian_at(np.maximum(t[None, :] - U, 0.0))
    return sigma_a(a) * (left + right)


@dataclass
class CoexistenceReport:
    a: float
    n: int
    replicas: int
    times: tuple[float, ...]
    u_hat: np.ndarray
    W: np.ndarray
    checks: list[dict] = field(default_factory=list)
    ladder: dict[int, dict] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def check(self, name: str) -> dict:
        for c in self.checks:
            if c["test"] == name:
                return c
        raise KeyError(name)


def _fluct_chunk(args):
    a, n, seed, start, stop, times = args
    batch = _chunk_task((a, a, n, seed, start, stop, True))
    recomputed = tau_star_rows(batch.occupations)
    return (
        batch.tau_star / n,
        fluctuation_matrix(batch.occupations, batch.tau_star, a, times),
        lln_sup_gap(batch.occupations, batch.tau_star, a),
        int((recomputed != batch.tau_star).sum()),
        np.abs(batch.tau_star - batch.t_n),
    )


def _run(a, n, replicas, seed, times, workers, chunk):
    tn_law(a, a, n)
    tasks = [(a, n, seed, s, e, tuple(times)) for s, e in chunk_ranges(replicas, chunk or default_chunk(n))]
    parts = list(map_ordered(_fluct_chunk, tasks, resolve_workers(workers)))
    return (
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
        sum(p[3] for p in parts),
        np.concatenate([p[4] for p in parts]),
    )


def _entry(test, statistic, tolerance, ok):
    return {"test": test, "statistic": float(statistic), "tolerance": float(tolerance), "pass": bool(ok)}


def coexistence_report(
    a: float,
    n: int,
    replicas: int,
    times=DEFAULT_TIMES,
    seed: int = 0,
    workers: int | None = None,
    ladder=None,
    ladder_replicas: int = 10_000,
    chunk: int | None = None,
) -> CoexistenceReport:
    """Sample ``replicas`` stationary draws at a = b and test them against the limit laws."""
    if not a > 1:
        raise ValueError(f"coexistence line needs a > 1, got {a}")
    times = tuple(float(t) for t in times)
    if list(times) != sorted(times):
        raise ValueError("times must be sorted")
    u_hat, W, gaps, mismatches, _ = _run(a, n, replicas, seed, times, workers, chunk)
    rep = CoexistenceReport(a=a, n=n, replicas=replicas, times=times, u_hat=u_hat, W=W)
    checks = rep.checks
    checks.append(_entry("tau_star_recomputed_mismatches", mismatches, 0, mismatches == 0))
    checks.append(_entry("ks_u_hat_uniform", ks_statistic(u_hat), TOL_KS_UNIFORM, ks_statistic(u_hat) <= TOL_KS_UNIFORM))
    s2 = sigma_a(a) ** 2
    positive = [i for i, t in enumerate(times) if t > 0]
    cov = np.cov(W[:, positive], rowvar=False, ddof=1).reshape(len(positive), len(positive))
    for k, i in enumerate(positive):
        t = times[i]
        col = W[:, i]
        mean = col.mean()
        checks.append(_entry(f"mean_W@{t}", abs(mean), TOL_MEAN_W, abs(mean) <= TOL_MEAN_W))
        rel = cov[k, k] / (s2 * t) - 1.0
        checks.append(_entry(f"var_W@{t}_rel_err", abs(rel), TOL_VAR_REL, abs(rel) <= TOL_VAR_REL))
        ks = ks_statistic(col, "normal", math.sqrt(s2 * t))
        checks.append(_entry(f"ks_W@{t}_normal", ks, TOL_KS_NORMAL, ks <= TOL_KS_NORMAL))
        corr = np.corrcoef(u_hat, col)[0, 1]
        checks.append(_entry(f"corr_u_hat_W@{t}", abs(corr), TOL_CORR, abs(corr) <= TOL_CORR))
    for k, i in enumerate(positive):
        for l in range(k + 1, len(positive)):
            s, t = times[i], times[positive[l]]
            err = abs(cov[k, l] - limit_covariance(a, s, t))
            checks.append(_entry(f"cov_W@{s},{t}_abs_err", err, TOL_COV, err <= TOL_COV))
    frac = float((gaps <= LLN_GAP).mean())
    checks.append(_entry("lln_sup_gap_fraction", frac, LLN_FRACTION, frac >= LLN_FRACTION))

    if ladder is None:
        ladder = sorted({max(1, n // 4), max(1, n // 2), n})
    for m in ladder:
        *_, gap = _run(a, m, ladder_replicas, seed, (1.0,), workers, chunk)
        q = np.quantile(gap, [0.5, 0.9, 0.99])
        rep.ladder[m] = {"median": float(q[0]), "q90": float(q[1]), "q99": float(q[2]), "max": int(gap.max())}
    if len(ladder) >= 2:
        lo, hi = rep.ladder[min(ladder)]["median"], rep.ladder[max(ladder)]["median"]
        checks.append(_entry("tightness_median_growth", hi - lo, TIGHTNESS_SLACK, hi <= lo + TIGHTNESS_SLACK))
    return rep
