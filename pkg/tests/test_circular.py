import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from u1circuit.circular import (
    QuasiProb,
    background_magnetization,
    circular_mean,
    drift_mu_tilde,
    discrete_wrapped_normal,
    quasiprob,
    sigma_from_R,
    site_angles,
    wrapped_normal_pdf,
)


def delta(n, site):
    v = np.zeros(n)
    v[site] = 1.0
    return QuasiProb(v, site_angles(n))


def test_site_angles():
    th = site_angles(4)
    assert np.allclose(th, [math.pi, -math.pi / 2, 0, math.pi / 2])
    assert np.all((th > -math.pi) & (th <= math.pi))
    assert site_angles(7)[3] == pytest.approx(-2 * math.pi * 0.5 / 7)


def test_background():
    assert background_magnetization(20, 0) == pytest.approx(-1 / 38)
    assert background_magnetization(4, 0.5) == 0.0


def test_quasiprob_normalization():
    # initial profile: 1/2 on the centre, M_B elsewhere -> p is a delta
    n, m = 10, 0
    mb = background_magnetization(n, m)
    prof = np.full(n, mb)
    prof[n // 2] = 0.5
    p = quasiprob(prof, mb)
    assert np.allclose(p.values, np.eye(n)[n // 2])
    with pytest.raises(ValueError):
        quasiprob(prof, 0.5)


def test_delta_moment():
    c = circular_mean(delta(12, 6))
    assert c.R == pytest.approx(1.0)
    assert c.sigma == 0.0 and c.mu == 0.0
    c = circular_mean(delta(12, 9))
    assert c.mu == pytest.approx(math.pi / 2)


def test_uniform_and_antipodal_have_no_mean():
    n = 10
    c = circular_mean(QuasiProb(np.full(n, 1 / n), site_angles(n)))
    assert abs(c.R) < 1e-15
    p = np.zeros(n)
    p[0] = p[5] = 0.5
    c = circular_mean(QuasiProb(p, site_angles(n)))
    assert abs(c.R) < 1e-15
    assert sigma_from_R(0.0) == math.inf
    exact_zero = circular_mean(QuasiProb(np.zeros(n), site_angles(n)))
    assert exact_zero.sigma == math.inf and not exact_zero.mu_defined


def test_sigma_from_R_vectorized():
    R = np.array([1.0, math.exp(-0.5), 0.0, 1.0 + 1e-12])
    s = sigma_from_R(R)
    assert s[0] == 0 and s[1] == pytest.approx(1.0) and s[2] == math.inf and s[3] == 0


def test_mu_tilde_folds_position():
    n = 16
    for site, expected in [(8, 0.0), (12, math.pi / 2), (4, math.pi / 2), (0, math.pi)]:
        assert drift_mu_tilde(delta(n, site)) == pytest.approx(expected, abs=1e-12)


@given(st.integers(4, 40), st.integers(0, 2**32 - 1), st.integers(0, 39))
@settings(max_examples=60, deadline=None)
def test_translation_covariance(n, seed, shift):
    rng = np.random.default_rng(seed)
    v = rng.random(n)
    v /= v.sum()
    a = circular_mean(QuasiProb(v, site_angles(n)))
    b = circular_mean(QuasiProb(np.roll(v, shift), site_angles(n)))
    assert abs(b.R) == pytest.approx(abs(a.R), abs=1e-12)
    assert b.R == pytest.approx(a.R * np.exp(2j * np.pi * shift / n), abs=1e-12)


@given(st.floats(0.05, 3.0), st.floats(-math.pi, math.pi))
@settings(max_examples=40, deadline=None)
def test_wrapped_normal_normalized(sigma, mu):
    total, _ = integrate.quad(lambda t: wrapped_normal_pdf(t, mu, sigma), -math.pi, math.pi, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_wrapped_normal_limits():
    th = np.linspace(-math.pi, math.pi, 11)
    assert np.allclose(wrapped_normal_pdf(th, 0.0, 50.0), 1 / (2 * math.pi), rtol=1e-10)
    narrow = wrapped_normal_pdf(th, 0.0, 0.1)
    plain = np.exp(-(th**2) / 0.02) / (0.1 * math.sqrt(2 * math.pi))
    assert np.allclose(narrow, plain, atol=1e-14)
    with pytest.raises(ValueError):
        wrapped_normal_pdf(0.0, 0.0, 0.0)


def test_monte_carlo_recovers_sigma():
    rng = np.random.default_rng(0)
    for sigma in (0.3, 1.0, 1.8):
        th = rng.normal(0.4, sigma, 200_000)
        R = np.exp(1j * th).mean()
        assert math.sqrt(-2 * math.log(abs(R))) == pytest.approx(sigma, rel=0.02)
        assert np.angle(R) == pytest.approx(0.4, abs=0.02)


def test_discrete_wrapped_normal_gap_shrinks():
    # narrow enough that coarse rings visibly miss the continuum value
    sigma = 0.3
    gaps = []
    for n in (10, 20, 50, 100):
        q = discrete_wrapped_normal(n, sigma)
        assert q.sum() == pytest.approx(1.0)
        c = circular_mean(QuasiProb(q, site_angles(n)))
        gaps.append(abs(c.sigma - sigma))
    assert all(b <= a + 1e-15 for a, b in zip(gaps, gaps[1:]))
    assert gaps[0] > 1e-2
    assert gaps[-1] < 1e-12
