import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coexline import oracle
from coexline.denisov import (
    MinLocationLaw,
    StationaryBatch,
    concat,
    concat_primed,
    draw_from_uniforms,
    iter_batches,
    sample_batch,
    sample_stationary,
    sample_tn,
    tau_star_rows,
    tn_law,
    tn_prime,
)
from coexline.model import tau_star
from coexline.rng import replica_rng
from coexline.walks import path_from_steps, steps_of, survival_table, weight_w

GRID = [(2.0, 2.0), (3.0, 3.0), (3.0, 1.5), (0.5, 2.0), (0.5, 0.5)]


# law of T ------------------------------------------------------------------


def test_tn_law_n1_example():
    law = tn_law(3.0, 3.0, 1)
    assert law.C == pytest.approx(2.0, abs=1e-14)
    assert law.pmf == pytest.approx([5 / 8, 3 / 8], abs=1e-15)


@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_tn_law_n1_closed_form(a, b):
    law = tn_law(a, b, 1)
    assert abs(law.C - (a + b + 2) / 4) <= 1e-12 * law.C
    assert abs(law.pmf[1] - a / (a + b + 2)) <= 1e-12


@pytest.mark.parametrize("a, b", GRID)
@pytest.mark.parametrize("n", [1, 5, 40, 500])
def test_tn_law_normalised_and_positive(a, b, n):
    law = tn_law(a, b, n)
    assert law.pmf.size == n + 1
    assert abs(law.pmf.sum() - 1) <= 1e-12
    assert (law.pmf > 0).all()
    assert law.cdf[-1] == 1.0


@pytest.mark.parametrize("a, b", GRID)
def test_tn_law_weights_from_formula(a, b):
    n = 9
    pa, pb = survival_table(a, n).p, survival_table(b, n).p
    wa, wb = weight_w(a), weight_w(b)
    raw = [wb**n * pb[n]] + [a / 4 * wa ** (m - 1) * wb ** (n - m) * pa[m - 1] * pb[n - m] for m in range(1, n + 1)]
    law = tn_law(a, b, n)
    assert law.C == pytest.approx(sum(raw), rel=1e-13)
    assert law.pmf == pytest.approx(np.array(raw) / sum(raw), rel=1e-12)


def test_normaliser_asymptotics():
    a, n = 3.0, 4000
    law = tn_law(a, a, n)
    log_ref = math.log(a / 4 * n) + (n - 1) * math.log(weight_w(a)) + 2 * math.log(1 - 1 / a**2)
    assert abs(math.exp(law.log_C - log_ref) - 1) <= 0.02


def test_tn_law_explicit_tables_and_errors():
    law = tn_law(2.0, 3.0, 10, survival_table(2.0, 12), survival_table(3.0, 12))
    assert law.pmf == pytest.approx(tn_law(2.0, 3.0, 10).pmf, abs=1e-15)
    with pytest.raises(ValueError):
        tn_law(0.0, 1.0, 3)
    with pytest.raises(ValueError):
        tn_law(2.0, 3.0, 10, survival_table(3.0, 12), survival_table(3.0, 12))
    with pytest.raises(ValueError):
        tn_law(2.0, 3.0, 10, survival_table(2.0, 5), survival_table(3.0, 12))


def test_sample_tn_frequency():
    law = tn_law(3.0, 3.0, 1)
    rng = np.random.default_rng(21)
    hits = sum(sample_tn(law, rng) for _ in range(10**6))
    assert abs(hits / 10**6 - 3 / 8) <= 0.002


def test_sample_tn_degenerate():
    pmf = np.array([0.0, 0.0, 1.0, 0.0])
    law = MinLocationLaw(3, 1.0, 1.0, np.log(pmf + 1e-300), pmf, np.cumsum(pmf), 0.0)
    rng = np.random.default_rng(0)
    assert {sample_tn(law, rng) for _ in range(1000)} == {2}


def test_sample_tn_mean_large_n():
    law = tn_law(3.0, 3.0, 2000)
    rng = np.random.default_rng(22)
    m = np.array([sample_tn(law, rng) for _ in range(10**5)])
    assert abs(m.mean() / 2000 - 0.5) <= 0.01


# concatenation -------------------------------------------------------------


def test_concat_figure_example():
    L = [0, 1, 2, 1, 1]
    R = [0, 1, 1, 0, 1, 1, 1, 2, 3, 4]
    S = concat(L, R, 14, 5)
    assert S.size == 15
    assert (S[5], S[14], S[8]) == (-2, 2, -2)
    assert np.argmin(S) == 5


def test_concat_edge_cases():
    R = np.array([0, 1, 1, 2])
    assert concat([0], R, 3, 0).tolist() == R.tolist()
    assert concat([], R, 3, 0).tolist() == R.tolist()
    S = concat(np.zeros(4, dtype=int), [0], 4, 4)
    assert S.tolist() == [0, 0, 0, 0, -1]
    with pytest.raises(ValueError):
        concat([0, 1], R, 3, 0)
    with pytest.raises(ValueError):
        concat([0, 1, 2], R, 5, 2)


def test_concat_primed_examples():
    assert concat_primed([0], [0, 1], 2, 1).tolist() == [0, 0, 1]
    assert concat_primed([0], [0, 1, 1], 2, 0).tolist() == [0, 1, 1]
    with pytest.raises(ValueError):
        concat_primed([0], [0, 1], 3, 1)


@given(st.data())
def test_concat_primed_increments_are_occupations(data):
    n = data.draw(st.integers(1, 30))
    m = data.draw(st.integers(0, n))
    left = data.draw(st.lists(st.integers(-1, 0), min_size=max(m - 1, 0), max_size=max(m - 1, 0)))
    right = data.draw(st.lists(st.integers(0, 1), min_size=n - m, max_size=n - m))
    Sp = concat_primed(path_from_steps(left), path_from_steps(right), n, m)
    d = steps_of(Sp)
    assert Sp[0] == 0 and d.size == n
    assert np.isin(d, (0, 1)).all()
    if m >= 1:
        assert d[m - 1] == 0


@pytest.mark.parametrize("occ, expected", [((1, 1, 1), 0), ((0, 0, 1, 1), 2)])
def test_tn_prime_examples(occ, expected):
    assert tn_prime(path_from_steps(occ)) == expected


def test_tn_prime_matches_tau_star():
    rng = np.random.default_rng(9)
    occ = rng.integers(0, 2, size=(10_000, 20))
    rows = tau_star_rows(occ)
    for i in range(occ.shape[0]):
        assert tn_prime(path_from_steps(occ[i])) == tau_star(occ[i]) == rows[i]


# the sampler ---------------------------------------------------------------


@pytest.mark.parametrize("a, b", GRID)
@pytest.mark.parametrize("n", [1, 2, 7, 60])
def test_single_draw_invariants(a, b, n):
    rng = np.random.default_rng(n)
    for _ in range(50):
        s = sample_stationary(a, b, n, rng, validate=True)
        assert s.t_n == oracle.first_min_index(s.S)
        assert len(s.L) - 1 == max(s.t_n - 1, 0) and len(s.R) - 1 == n - s.t_n
        assert s.S.tolist() == concat(s.L, s.R, n, s.t_n).tolist()
        assert s.tau_star == tau_star(s.occupations)


def test_single_draw_matches_batch_row():
    # sample_stationary and the batch path share one uniform layout
    batch = sample_batch(2.0, 0.7, 25, seed=5, replicas=6)
    for i in range(6):
        s = sample_stationary(2.0, 0.7, 25, replica_rng(5, i))
        assert s.t_n == batch.t_n[i] and s.tau_star == batch.tau_star[i]
        assert (steps_of(s.S) == batch.steps[i]).all()
        assert (s.occupations == batch.occupations[i]).all()


@settings(max_examples=30, deadline=None)
@given(
    st.sampled_from(GRID),
    st.integers(1, 40),
    st.integers(0, 2**32),
)
def test_batch_validates_for_arbitrary_uniforms(ab, n, seed):
    a, b = ab
    U = np.random.default_rng(seed).random((64, 2 * n + 1))
    batch = draw_from_uniforms(a, b, n, U)
    batch.validate()


def test_draw_from_uniforms_shape_check():
    with pytest.raises(ValueError):
        draw_from_uniforms(2.0, 2.0, 3, np.zeros((4, 6)))


def test_coins_only_used_on_zero_steps():
    U = np.random.default_rng(1).random((200, 41))
    flipped = U.copy()
    flipped[:, 21:] = 1 - flipped[:, 21:]
    x, y = draw_from_uniforms(3.0, 3.0, 20, U), draw_from_uniforms(3.0, 3.0, 20, flipped)
    assert (x.steps == y.steps).all()
    nonzero = x.steps != 0
    assert (x.occupations[nonzero] == y.occupations[nonzero]).all()


@pytest.mark.parametrize("a, b, p1", [(3.0, 3.0, 0.5), (3.0, 1.0, 1 / 3)])
def test_n1_occupation_frequency(a, b, p1):
    batch = sample_batch(a, b, 1, seed=31, replicas=10**5)
    assert abs(batch.occupations[:, 0].mean() - p1) <= 0.005


def test_n6_law_matches_ctmc():
    batch = sample_batch(2.0, 2.0, 6, seed=32, replicas=10**6)
    emp = oracle.empirical("binary", 6, oracle.binary_index(batch.occupations))
    pi = oracle.ctmc_stationary(1 / 3, 1 / 3, 6)
    assert oracle.tv_distance(emp, pi) <= 0.01


@pytest.mark.parametrize("a, b", [(3.0, 1.5), (0.5, 2.0)])
def test_step_law_matches_walk_measure(a, b):
    batch = sample_batch(a, b, 5, seed=33, replicas=4 * 10**5)
    emp = oracle.empirical("ternary", 5, oracle.ternary_index(batch.steps))
    assert oracle.tv_distance(emp, oracle.enumerate_prw(a, b, 5)) <= 0.01


def test_deterministic_across_chunks_and_workers():
    ref = sample_batch(3.0, 2.0, 30, seed=77, replicas=40)
    for chunk, workers in [(7, 1), (7, 2), (40, 2), (1, 1)]:
        other = sample_batch(3.0, 2.0, 30, seed=77, replicas=40, chunk=chunk, workers=workers)
        for field in ("t_n", "tau_star", "steps", "occupations"):
            assert (getattr(ref, field) == getattr(other, field)).all()


def test_iter_batches_offset_and_empty():
    full = sample_batch(2.0, 2.0, 10, seed=3, replicas=20)
    tail = StationaryBatch.concatenate(iter_batches(2.0, 2.0, 10, seed=3, replicas=5, start=15))
    assert (tail.occupations == full.occupations[15:]).all()
    assert len(sample_batch(2.0, 2.0, 10, seed=3, replicas=0)) == 0
    with pytest.raises(ValueError):
        sample_stationary(2.0, 2.0, 0, np.random.default_rng(0))


def test_small_a_large_n_underflow_is_reported():
    # p_n for a = 0.05 shrinks by about 0.18 per step, past double range by n = 1000
    with pytest.raises(ValueError):
        tn_law(0.05, 0.05, 1000)
