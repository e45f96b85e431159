"""Circular moments of site quasi-probabilities on a ring."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def site_angles(n_sites: int) -> np.ndarray:
    """theta_n = 2 pi (n - N/2) / N wrapped into (-pi, pi]; the centre site sits at 0."""
    theta = 2 * np.pi * (np.arange(n_sites) - n_sites / 2) / n_sites
    return np.where(theta <= -np.pi, theta + 2 * np.pi, theta)


def background_magnetization(n_sites: int, magnetization: float) -> float:
    """Per-site magnetization off the excited site in the initial profile."""
    return (magnetization - 0.5) / (n_sites - 1)


@dataclass(frozen=True)
class QuasiProb:
    values: np.ndarray
    angles: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class CircularMoment:
    """R = sum_n p_n exp(i theta_n) with mu = Arg R and sigma = sqrt(-2 ln|R|).

    `sigma` is ``inf`` and `mu_defined` is False when R vanishes.
    """

    R: complex
    mu: float
    sigma: float
    mu_defined: bool = True


def quasiprob(profile, background: float) -> QuasiProb:
    """p_n = 2 (M_n - M_B) / (1 - 2 M_B)."""
    if background == 0.5:
        raise ValueError("background magnetization 1/2 gives a degenerate normalization")
    m = np.asarray(profile, dtype=float)
    p = 2.0 * (m - background) / (1.0 - 2.0 * background)
    return QuasiProb(p, site_angles(m.size))


def circular_mean(p: QuasiProb) -> CircularMoment:
    R = complex(np.dot(p.values, np.exp(1j * p.angles)))
    r = abs(R)
    if r == 0.0:
        return CircularMoment(R, float("nan"), math.inf, False)
    # negative quasi-probabilities can push |R| marginally above 1
    sigma = math.sqrt(max(0.0, -2.0 * math.log(r)))
    return CircularMoment(R, math.atan2(R.imag, R.real), sigma, True)


def sigma_from_R(R) -> np.ndarray:
    """Vectorized spread; inf where |R| == 0."""
    r = np.abs(np.asarray(R))
    with np.errstate(divide="ignore"):
        return np.sqrt(np.maximum(0.0, -2.0 * np.log(r)))


def drift_mu_tilde(p: QuasiProb) -> float:
    """Arg of sum_n p_n exp(i |theta_n|): position folded onto [0, pi]."""
    z = np.dot(p.values, np.exp(1j * np.abs(p.angles)))
    return float(np.angle(z))


def _k_max(sigma: float, tol: float = 1e-14) -> int:
    # Terms further than sigma * sqrt(2 ln(1/tol)) from the centre are below tol.
    reach = sigma * math.sqrt(2.0 * math.log(1.0 / tol))
    return int(math.ceil(reach / (2 * math.pi))) + 1


def wrapped_normal_pdf(theta, mu: float, sigma: float, k_max: int | None = None):
    """Density of a normal(mu, sigma) wrapped onto the circle."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if k_max is None:
        k_max = _k_max(sigma)
    theta = np.asarray(theta, dtype=float)
    k = np.arange(-k_max, k_max + 1)
    x = theta[..., None] - mu + 2 * np.pi * k
    dens = np.exp(-(x**2) / (2 * sigma**2)).sum(axis=-1) / (sigma * math.sqrt(2 * math.pi))
    return dens if dens.ndim else float(dens)


def discrete_wrapped_normal(n_sites: int, sigma: float) -> np.ndarray:
    """Wrapped normal sampled on the site angles, centred at theta = 0, normalized to 1."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    q = wrapped_normal_pdf(site_angles(n_sites), 0.0, sigma)
    q = np.atleast_1d(q)
    return q / q.sum()
