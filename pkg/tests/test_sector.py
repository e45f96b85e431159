import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from u1circuit.sector import (
    SectorBasis,
    SectorState,
    measure_profile,
    project_up,
    random_phase_state,
    random_sector_state,
    sector_dimension,
)

from oracles import embed, profile_full, sector_states


@pytest.mark.parametrize("n,k,d", [(16, 8, 12870), (20, 10, 184756), (4, 0, 1), (4, 4, 1), (10, 3, 120)])
def test_sector_dimension(n, k, d):
    assert sector_dimension(n, k) == d


def test_sector_dimension_errors():
    with pytest.raises(ValueError):
        sector_dimension(4, 5)
    with pytest.raises(ValueError):
        sector_dimension(4, -1)
    with pytest.raises(OverflowError):
        sector_dimension(65, 3)


def test_basis_limits():
    with pytest.raises(ValueError):
        SectorBasis(29, 14)
    with pytest.raises(ValueError):
        SectorBasis(1, 0)


def test_from_magnetization():
    b = SectorBasis.from_magnetization(16, 0)
    assert b.n_up == 8 and b.dimension == 12870
    assert SectorBasis.from_magnetization(5, 0.5).n_up == 3
    assert SectorBasis.from_magnetization(4, -1).magnetization == -1
    with pytest.raises(ValueError):
        SectorBasis.from_magnetization(4, 0.5)


def test_rank_examples():
    b = SectorBasis(4, 2)
    assert b.rank(0b0011) == 0
    assert b.rank(0b1100) == 5
    assert [b.unrank(i) for i in range(6)] == [0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]
    with pytest.raises(ValueError):
        b.rank(0b0111)
    with pytest.raises(ValueError):
        b.rank(0b10011)
    with pytest.raises(IndexError):
        b.unrank(6)


@given(st.integers(2, 14).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
@settings(max_examples=60, deadline=None)
def test_states_match_combinations(nk):
    n, k = nk
    b = SectorBasis(n, k)
    assert b.states.tolist() == sector_states(n, k)


@given(st.integers(2, 20).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(0, 10**9))))
@settings(max_examples=80, deadline=None)
def test_rank_unrank_roundtrip(args):
    n, k, r = args
    b = SectorBasis(n, k)
    i = r % b.dimension
    assert b.rank(b.unrank(i)) == i
    assert np.array_equal(b.rank_many(b.states), np.arange(b.dimension))


def test_random_state_normalized_and_seeded():
    b = SectorBasis(10, 5)
    a = random_sector_state(b, np.random.default_rng(3))
    c = random_sector_state(b, np.random.default_rng(3))
    assert abs(a.norm() - 1) < 1e-12
    assert np.array_equal(a.amplitudes, c.amplitudes)
    p = random_phase_state(b, np.random.default_rng(1))
    assert np.allclose(np.abs(p.amplitudes), 1 / math.sqrt(b.dimension))


def test_random_state_is_haar_like():
    # |psi_i|^2 of Haar states are Beta(1, d-1); d * |psi_i|^2 ~ Exp(1)
    from scipy import stats

    b = SectorBasis(12, 6)
    w = b.dimension * np.abs(random_sector_state(b, np.random.default_rng(0)).amplitudes) ** 2
    assert stats.kstest(w, "expon").pvalue > 1e-3


def test_project_up_example():
    b = SectorBasis(4, 2)
    amps = np.full(6, 1 / math.sqrt(6))
    proj, w = project_up(SectorState(b, amps), 0)
    assert w == pytest.approx(0.5, abs=1e-14)
    assert proj.norm() == pytest.approx(1.0)
    up = (b.states & 1).astype(bool)
    assert np.all(proj.amplitudes[~up] == 0)


def test_project_up_empty():
    b = SectorBasis(4, 0)
    proj, w = project_up(SectorState(b, np.ones(1)), 2)
    assert proj is None and w == 0.0
    b = SectorBasis(4, 2)
    proj, w = project_up(SectorState.basis_state(b, 0b0011), 3)
    assert proj is None and w == 0.0


def test_profile_examples():
    b = SectorBasis(4, 2)
    psi = SectorState.basis_state(b, 0b0101)
    assert np.allclose(measure_profile(psi), [0.5, -0.5, 0.5, -0.5])
    uniform = SectorState(b, np.full(6, 1 / math.sqrt(6)))
    assert np.allclose(measure_profile(uniform), 0.0, atol=1e-15)


@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_profile_matches_full_space_and_sums_to_M(n, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, n + 1))
    b = SectorBasis(n, k)
    psi = random_sector_state(b, rng)
    prof = measure_profile(psi)
    assert np.allclose(prof, profile_full(embed(psi.amplitudes, b.states, n), n), atol=1e-12)
    assert prof.sum() == pytest.approx(b.magnetization, abs=1e-12)


def test_project_up_weight_is_typical():
    # <Lambda> over typical states is (2M/N + 1)/2: the fraction of up spins per site
    for n, k in [(12, 6), (12, 8)]:
        b = SectorBasis(n, k)
        rng = np.random.default_rng(11)
        w = [project_up(random_sector_state(b, rng), 6)[1] for _ in range(200)]
        expected = (2 * b.magnetization / n + 1) / 2
        assert np.mean(w) == pytest.approx(expected, abs=4 * np.std(w) / np.sqrt(200) + 1e-12)


def test_project_up_keeps_already_up_state():
    b = SectorBasis(4, 2)
    psi = SectorState.basis_state(b, 0b0101)
    proj, w = project_up(psi, 0)
    assert w == 1.0 and np.array_equal(proj.amplitudes, psi.amplitudes)
    with pytest.raises(IndexError):
        project_up(psi, 4)


def test_typical_profile_averages_to_zero():
    b = SectorBasis(12, 6)
    rng = np.random.default_rng(5)
    prof = np.array([measure_profile(random_sector_state(b, rng)) for _ in range(100)])
    mean = prof.mean(axis=0)
    err = prof.std(axis=0, ddof=1) / 10
    assert np.all(np.abs(mean) < 3 * err + 1e-12)


def test_projected_profile_matches_background():
    n = 12
    b = SectorBasis(n, 6)
    rng = np.random.default_rng(8)
    prof = np.array([measure_profile(project_up(random_sector_state(b, rng), 6)[0]) for _ in range(50)])
    assert np.allclose(prof[:, 6], 0.5, atol=1e-13)
    others = np.delete(prof, 6, axis=1)
    err = others.std(axis=0, ddof=1) / np.sqrt(len(others))
    assert np.all(np.abs(others.mean(axis=0) + 1 / (2 * (n - 1))) < 4 * err)
