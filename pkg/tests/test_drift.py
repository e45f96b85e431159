import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from u1circuit.drift import (
    drift_bounds,
    drift_of_permutation,
    reversed_staircase_drift,
    staircase,
    typical_drift,
)

from oracles import all_permutations, drift_gates_vectorized, drift_walk_quantum


@pytest.mark.parametrize("n", [4, 5, 8, 11, 20])
def test_staircase_extremes(n):
    assert drift_of_permutation(n, staircase(n)) == n
    assert drift_of_permutation(n, staircase(n, reverse=True)) == pytest.approx(
        n * n / (n * n - 2 * n + 2), rel=1e-15)
    assert reversed_staircase_drift(n) == drift_of_permutation(n, staircase(n, reverse=True))


def test_staircase_examples():
    assert staircase(6).tolist() == [3, 4, 5, 0, 1, 2]
    assert staircase(6, reverse=True).tolist() == [2, 3, 4, 5, 0, 1]
    assert drift_bounds(4) == (4 / 3, 4.0)


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 8])
def test_every_ordering_within_bounds(n):
    lo, hi = drift_bounds(n)
    perms = all_permutations(n)
    d = n * n / drift_gates_vectorized(perms, n)
    assert d.min() == pytest.approx(lo) and d.max() == pytest.approx(hi)


@pytest.mark.parametrize("n", [4, 6, 9, 20])
def test_one_hop_per_period_is_slower_than_reversed_staircase(n):
    perm = (n // 2 - 2 - np.arange(n)) % n
    assert drift_of_permutation(n, perm) == pytest.approx(n / (n - 1))
    assert drift_of_permutation(n, perm) < reversed_staircase_drift(n)


@pytest.mark.parametrize("n", [4, 6, 8, 10])
def test_typical_drift_within_staircase_values(n):
    est = typical_drift(n, 0)
    assert reversed_staircase_drift(n) <= est.mean_drift <= n


@given(st.integers(3, 30), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_scalar_walk_matches_vectorized(n, seed):
    perm = np.random.default_rng(seed).permutation(n)
    g = drift_gates_vectorized(perm[None, :], n)[0]
    assert drift_of_permutation(n, perm) == n * n / g


@pytest.mark.parametrize("n", [4, 5, 6, 7, 8])
def test_exact_enumeration_matches_oracle(n):
    g = drift_gates_vectorized(all_permutations(n), n)
    est = typical_drift(n, 0)
    assert est.exact and est.samples == math.factorial(n) and est.stderr == 0.0
    expected = Fraction(n * n * g.size, int(g.sum()))
    assert est.mean_drift == pytest.approx(float(expected), rel=1e-14)
    assert est.mean_of_ratios == pytest.approx(float(np.mean(n * n / g)), rel=1e-12)


def test_exact_value_n8():
    assert typical_drift(8, 0).mean_drift == pytest.approx(96 / 47, rel=1e-14)


def test_quantum_walk_agrees_on_all_orderings_n4():
    rng = np.random.default_rng(0)
    for perm in all_permutations(4):
        assert drift_walk_quantum(perm, 4, rng) == 16 / drift_of_permutation(4, perm)


def test_quantum_walk_agrees_on_sampled_orderings_n6():
    rng = np.random.default_rng(1)
    for _ in range(15):
        perm = rng.permutation(6)
        assert drift_walk_quantum(perm, 6, rng) == pytest.approx(36 / drift_of_permutation(6, perm))


def test_sampled_error_scales_as_inverse_root():
    a = typical_drift(14, 10_000, np.random.default_rng(0))
    b = typical_drift(14, 160_000, np.random.default_rng(1))
    assert not a.exact and a.samples == 10_000
    assert a.stderr / b.stderr == pytest.approx(4.0, rel=0.1)
    assert abs(a.mean_drift - b.mean_drift) < 4 * math.hypot(a.stderr, b.stderr)


def test_sampled_matches_exact_at_small_n():
    exact = typical_drift(9, 0)
    est = typical_drift(9, 200_000, np.random.default_rng(2), exact=False)
    assert abs(est.mean_drift - exact.mean_drift) < 4 * est.stderr


def test_sampling_is_seeded():
    a = typical_drift(12, 5000, np.random.default_rng(3), exact=False)
    b = typical_drift(12, 5000, np.random.default_rng(3), exact=False)
    assert a == b


def test_argument_errors():
    with pytest.raises(ValueError):
        drift_of_permutation(4, [0, 1, 1, 2])
    with pytest.raises(ValueError):
        typical_drift(12, 10, None, exact=False)
    with pytest.raises(ValueError):
        typical_drift(12, 0, np.random.default_rng(0), exact=False)
    with pytest.raises(ValueError):
        typical_drift(2, 10)
    with pytest.raises(ValueError):
        drift_of_permutation(2, [0, 1])
